#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pathkit/core/diagnostics.hpp"
#include "pathkit/core/jsonl.hpp"

namespace pathkit::ingest {

enum class Source { pubmed, book, annotation };

const char* to_string(Source s);
Source source_from_string(const std::string& s);

// One figure+caption extracted from a source archive.
struct FigureRecord {
  std::string record_id;  // "<article_id>#<figure_id>", unique per manifest
  std::string article_id;
  Source source = Source::pubmed;
  std::string image_ref;
  int width_px = 0;
  int height_px = 0;
  std::string caption;
  std::optional<double> pathology_score;  // in [0,1] when present
};

ojson to_json(const FigureRecord& r);
FigureRecord figure_record_from_json(const ojson& obj);

struct CorpusManifest {
  std::vector<FigureRecord> records;
  std::map<Source, std::size_t> counts;
  int schema_version = 1;
};

// Parses a line-delimited archive of article objects
// {article_id, figures:[{figure_id, image_ref, caption, width_px, height_px}]}.
// Figures without a caption or image reference are skipped and recorded in
// `diags`; an unparseable line is a framing error and aborts.
CorpusManifest parse_article_archive(std::istream& archive, Source source,
                                     DiagnosticsSink& diags);

// Writes/reads the manifest as line-delimited FigureRecord objects with
// stable field order (bit-exact for identical inputs).
void write_manifest(const std::string& path, const CorpusManifest& manifest);
std::vector<FigureRecord> read_manifest(const std::string& path);

enum class MissingScorePolicy { strict, drop, keep };

struct ScoreSidecar {
  std::map<std::string, double> scores;  // record_id -> [0,1]
};

ScoreSidecar load_score_sidecar(const std::string& path);

// Order-preserving partition: kept = score >= threshold (inclusive).
// Records absent from the sidecar follow `policy`: strict errors naming the
// record, drop sends them to dropped, keep sends them to kept.
std::pair<std::vector<FigureRecord>, std::vector<FigureRecord>>
filter_pathology(const std::vector<FigureRecord>& records,
                 const ScoreSidecar& scores, double threshold,
                 MissingScorePolicy policy);

// True iff min(width, height) >= min_edge_px.
bool filter_resolution(const FigureRecord& record, int min_edge_px);

// Whitespace-delimited word count; a word is a maximal run of
// non-whitespace bytes.
std::size_t count_words(const std::string& text);

// Keeps records whose word count is strictly greater than
// min_words_exclusive.
std::vector<FigureRecord> select_by_caption_words(
    const std::vector<FigureRecord>& records, std::size_t min_words_exclusive);

// Token counter contract: returns the token count, or nullopt on failure
// (the record is then skipped with a diagnostic).
using TokenCounter =
    std::function<std::optional<std::size_t>(const std::string&)>;

// The fallback counter: token count equals word count.
TokenCounter whitespace_token_counter();

struct TokenBound {
  enum class Kind { greater_than, fewer_than };
  Kind kind;
  std::size_t n;
};

std::vector<FigureRecord> select_by_caption_tokens(
    const std::vector<FigureRecord>& records, const TokenCounter& tokenizer,
    TokenBound bound, DiagnosticsSink* diags = nullptr);

}  // namespace pathkit::ingest
