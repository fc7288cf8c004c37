#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pathkit::cli {

struct IngestArgs {
  std::string source;
  std::string input;
  std::string output;
  std::string diagnostics;
  std::string run_manifest;
};
int cmd_ingest(const IngestArgs& args);

struct FilterArgs {
  std::string input;
  std::string output;
  std::string dropped;
  std::string scores;
  double threshold = 0.5;
  std::string missing = "strict";
  std::optional<int> min_edge;
  std::optional<std::uint64_t> min_words;
  std::optional<std::uint64_t> tokens_greater_than;
  std::optional<std::uint64_t> tokens_fewer_than;
  std::string diagnostics;
  std::string run_manifest;
};
int cmd_filter(const FilterArgs& args);

struct FigsplitArgs {
  std::string input;
  std::string boxes;
  std::string images_dir;
  std::string crops_dir;
  std::string subfigs_out;
  std::string subcaps_out;
  std::string transform_endpoint;
  std::string fixtures;
  bool refine = false;
  double dedup_iou = 0.9;
  unsigned jobs = 0;
  int timeout_ms = 10000;
  std::string diagnostics;
  std::string run_manifest;
};
int cmd_figsplit(const FigsplitArgs& args);

struct AlignArgs {
  std::string subfigs;
  std::string subcaps;
  std::string image_emb;
  std::string image_ids;
  std::string text_emb;
  std::string text_ids;
  std::string output;
  std::string dropped;
  double min_similarity = 0.2;
  unsigned jobs = 0;
  std::string diagnostics;
  std::string run_manifest;
};
int cmd_align(const AlignArgs& args);

struct InstructArgs {
  std::string pairs;
  std::string output;
  std::string serialized_out;
  std::vector<std::string> families = {"description"};
  std::string templates = "data/instruction_templates.json";
  std::uint64_t seed = 0;
  std::string scenarios;
  std::string registry;
  std::string transform_endpoint;
  std::string fixtures;
  int timeout_ms = 10000;
  std::string diagnostics;
  std::string run_manifest;
};
int cmd_instruct(const InstructArgs& args);

struct IndexBuildArgs {
  std::string emb;
  std::string ids;
  std::string output;
  std::uint64_t k_centroids = 0;  // 0 = ceil(sqrt(n))
  std::uint64_t max_iters = 25;
  std::uint64_t seed = 0;
  std::string run_manifest;
};
int cmd_index_build(const IndexBuildArgs& args);

struct IndexSearchArgs {
  std::string index;
  std::string query_emb;
  std::uint64_t k = 10;
  std::string nprobe = "all";
  std::string output;
  std::string run_manifest;
};
int cmd_index_search(const IndexSearchArgs& args);

struct EvalRetrievalArgs {
  std::string runs;
  std::uint64_t k = 10;
  std::string output;
  std::string run_manifest;
};
int cmd_eval_retrieval(const EvalRetrievalArgs& args);

struct EvalZeroshotArgs {
  std::string image_emb;
  std::string image_ids;
  std::string prompt_emb;
  std::string labels;
  std::string gold;
  std::string output;
  std::string run_manifest;
};
int cmd_eval_zeroshot(const EvalZeroshotArgs& args);

struct EvalVqaArgs {
  std::string pred;
  std::string gold;
  std::string output;
  std::string run_manifest;
};
int cmd_eval_vqa(const EvalVqaArgs& args);

struct ScoreContrastiveArgs {
  std::string emb_a;
  std::string emb_b;
  double temperature = 0.07;
  std::string output;
  std::string run_manifest;
};
int cmd_score_contrastive(const ScoreContrastiveArgs& args);

struct ScoreNllArgs {
  std::string logprobs;
  bool mean = false;
  std::string output;
  std::string run_manifest;
};
int cmd_score_nll(const ScoreNllArgs& args);

struct ServeArgs {
  std::string index;
  std::string meta;
  std::string registry;
  std::string bind = "127.0.0.1:8080";
  std::string embedder_endpoint;
  std::string fixtures;
  int timeout_ms = 10000;
  std::string run_manifest;
};
int cmd_serve(const ServeArgs& args);

}  // namespace pathkit::cli
