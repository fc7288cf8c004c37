#include "pathkit/ingest/ingest.hpp"

#include <cctype>
#include <set>

#include "pathkit/core/error.hpp"

namespace pathkit::ingest {

const char* to_string(Source s) {
  switch (s) {
    case Source::pubmed:
      return "pubmed";
    case Source::book:
      return "book";
    case Source::annotation:
      return "annotation";
  }
  return "pubmed";
}

Source source_from_string(const std::string& s) {
  if (s == "pubmed") return Source::pubmed;
  if (s == "book") return Source::book;
  if (s == "annotation") return Source::annotation;
  throw Error("unknown source: " + s +
              " (expected pubmed, book or annotation)");
}

ojson to_json(const FigureRecord& r) {
  ojson obj;
  obj["record_id"] = r.record_id;
  obj["article_id"] = r.article_id;
  obj["source"] = to_string(r.source);
  obj["image_ref"] = r.image_ref;
  obj["width_px"] = r.width_px;
  obj["height_px"] = r.height_px;
  obj["caption"] = r.caption;
  if (r.pathology_score) obj["pathology_score"] = *r.pathology_score;
  return obj;
}

FigureRecord figure_record_from_json(const ojson& obj) {
  FigureRecord r;
  r.record_id = obj.at("record_id").get<std::string>();
  r.article_id = obj.at("article_id").get<std::string>();
  r.source = source_from_string(obj.at("source").get<std::string>());
  r.image_ref = obj.at("image_ref").get<std::string>();
  r.width_px = obj.at("width_px").get<int>();
  r.height_px = obj.at("height_px").get<int>();
  r.caption = obj.at("caption").get<std::string>();
  if (obj.contains("pathology_score")) {
    r.pathology_score = obj.at("pathology_score").get<double>();
  }
  if (r.width_px <= 0 || r.height_px <= 0) {
    throw Error("record " + r.record_id + " has non-positive dimensions");
  }
  if (r.pathology_score &&
      (*r.pathology_score < 0.0 || *r.pathology_score > 1.0)) {
    throw Error("record " + r.record_id + " has pathology_score outside [0,1]");
  }
  return r;
}

CorpusManifest parse_article_archive(std::istream& archive, Source source,
                                     DiagnosticsSink& diags) {
  CorpusManifest manifest;
  std::set<std::string> seen_ids;
  for_each_jsonl(archive, [&](std::size_t, const ojson& article) {
    std::string article_id = article.value("article_id", std::string());
    if (article_id.empty()) {
      diags.add("ingest", "", "article without article_id skipped");
      return;
    }
    if (!article.contains("figures") || !article["figures"].is_array()) {
      diags.add("ingest", article_id, "article has no figures array");
      return;
    }
    for (const auto& fig : article["figures"]) {
      std::string figure_id = fig.value("figure_id", std::string());
      if (figure_id.empty()) {
        diags.add("ingest", article_id, "figure without figure_id skipped");
        continue;
      }
      std::string record_id = article_id + "#" + figure_id;
      std::string caption = fig.value("caption", std::string());
      if (caption.empty()) {
        diags.add("ingest", record_id, "figure has empty caption, skipped");
        continue;
      }
      std::string image_ref = fig.value("image_ref", std::string());
      if (image_ref.empty()) {
        diags.add("ingest", record_id,
                  "figure in article " + article_id +
                      " has no image reference, skipped");
        continue;
      }
      int width = fig.value("width_px", 0);
      int height = fig.value("height_px", 0);
      if (width <= 0 || height <= 0) {
        diags.add("ingest", record_id, "figure has invalid dimensions, skipped");
        continue;
      }
      if (!seen_ids.insert(record_id).second) {
        diags.add("ingest", record_id, "duplicate record id, skipped");
        continue;
      }
      FigureRecord r;
      r.record_id = std::move(record_id);
      r.article_id = article_id;
      r.source = source;
      r.image_ref = std::move(image_ref);
      r.width_px = width;
      r.height_px = height;
      r.caption = std::move(caption);
      manifest.records.push_back(std::move(r));
    }
  });
  for (const auto& r : manifest.records) manifest.counts[r.source]++;
  return manifest;
}

void write_manifest(const std::string& path, const CorpusManifest& manifest) {
  AtomicFileWriter writer(path);
  for (const auto& r : manifest.records) writer.write_line(to_json(r));
  writer.commit();
}

std::vector<FigureRecord> read_manifest(const std::string& path) {
  std::vector<FigureRecord> records;
  for_each_jsonl_file(path, [&](std::size_t, const ojson& obj) {
    records.push_back(figure_record_from_json(obj));
  });
  return records;
}

ScoreSidecar load_score_sidecar(const std::string& path) {
  ScoreSidecar sidecar;
  for_each_jsonl_file(path, [&](std::size_t offset, const ojson& obj) {
    if (!obj.contains("record_id") || !obj.contains("score")) {
      throw FramingError("score sidecar line missing record_id/score", offset);
    }
    double score = obj["score"].get<double>();
    if (score < 0.0 || score > 1.0) {
      throw Error("score outside [0,1] for record " +
                  obj["record_id"].get<std::string>());
    }
    sidecar.scores[obj["record_id"].get<std::string>()] = score;
  });
  return sidecar;
}

std::pair<std::vector<FigureRecord>, std::vector<FigureRecord>>
filter_pathology(const std::vector<FigureRecord>& records,
                 const ScoreSidecar& scores, double threshold,
                 MissingScorePolicy policy) {
  std::vector<FigureRecord> kept, dropped;
  for (const auto& r : records) {
    auto it = scores.scores.find(r.record_id);
    if (it == scores.scores.end()) {
      switch (policy) {
        case MissingScorePolicy::strict:
          throw Error("no pathology score for record " + r.record_id);
        case MissingScorePolicy::drop:
          dropped.push_back(r);
          continue;
        case MissingScorePolicy::keep:
          kept.push_back(r);
          continue;
      }
    }
    FigureRecord scored = r;
    scored.pathology_score = it->second;
    if (it->second >= threshold) {
      kept.push_back(std::move(scored));
    } else {
      dropped.push_back(std::move(scored));
    }
  }
  return {std::move(kept), std::move(dropped)};
}

bool filter_resolution(const FigureRecord& record, int min_edge_px) {
  return std::min(record.width_px, record.height_px) >= min_edge_px;
}

std::size_t count_words(const std::string& text) {
  std::size_t count = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    bool ws = std::isspace(c) != 0;
    if (!ws && !in_word) ++count;
    in_word = !ws;
  }
  return count;
}

std::vector<FigureRecord> select_by_caption_words(
    const std::vector<FigureRecord>& records,
    std::size_t min_words_exclusive) {
  std::vector<FigureRecord> kept;
  for (const auto& r : records) {
    if (count_words(r.caption) > min_words_exclusive) kept.push_back(r);
  }
  return kept;
}

TokenCounter whitespace_token_counter() {
  return [](const std::string& text) -> std::optional<std::size_t> {
    return count_words(text);
  };
}

std::vector<FigureRecord> select_by_caption_tokens(
    const std::vector<FigureRecord>& records, const TokenCounter& tokenizer,
    TokenBound bound, DiagnosticsSink* diags) {
  std::vector<FigureRecord> kept;
  for (const auto& r : records) {
    std::optional<std::size_t> tokens;
    try {
      tokens = tokenizer(r.caption);
    } catch (const std::exception& e) {
      tokens = std::nullopt;
      if (diags) diags->add("token-filter", r.record_id, e.what());
    }
    if (!tokens) {
      if (diags) diags->add("token-filter", r.record_id, "tokenizer failed");
      continue;
    }
    bool keep = bound.kind == TokenBound::Kind::greater_than
                    ? *tokens > bound.n
                    : *tokens < bound.n;
    if (keep) kept.push_back(r);
  }
  return kept;
}

}  // namespace pathkit::ingest
