#include <iostream>

#include "CLI11.hpp"

#include "cli_common.hpp"
#include "commands.hpp"

using namespace pathkit::cli;

int main(int argc, char** argv) {
  CLI::App app{"pathology corpus engineering and retrieval toolkit"};
  app.require_subcommand(1);

  IngestArgs ingest_args;
  auto* ingest = app.add_subcommand(
      "ingest", "parse an article archive into a figure-caption manifest");
  ingest->add_option("--source", ingest_args.source,
                     "archive source: pubmed, book or annotation")
      ->required();
  ingest->add_option("--in", ingest_args.input, "article archive (JSONL)")
      ->required();
  ingest->add_option("--out", ingest_args.output, "manifest output (JSONL)")
      ->required();
  ingest->add_option("--diagnostics", ingest_args.diagnostics,
                     "diagnostics sidecar path");
  ingest->add_option("--run-manifest", ingest_args.run_manifest);

  FilterArgs filter_args;
  auto* filter = app.add_subcommand(
      "filter", "apply pathology/resolution/caption-length gates");
  filter->add_option("--in", filter_args.input)->required();
  filter->add_option("--out", filter_args.output)->required();
  filter->add_option("--dropped", filter_args.dropped,
                     "write the dropped partition here");
  filter->add_option("--scores", filter_args.scores,
                     "pathology score sidecar (JSONL)");
  filter->add_option("--threshold", filter_args.threshold,
                     "pathology score threshold (inclusive)")
      ->capture_default_str();
  filter->add_option("--missing", filter_args.missing,
                     "missing-score policy: strict, drop or keep")
      ->capture_default_str();
  filter->add_option("--min-edge", filter_args.min_edge,
                     "minimum shorter-edge pixels (inclusive)");
  filter->add_option("--min-words", filter_args.min_words,
                     "keep captions with strictly more words than this");
  filter->add_option("--tokens-greater-than", filter_args.tokens_greater_than,
                     "keep captions with strictly more tokens than this");
  filter->add_option("--tokens-fewer-than", filter_args.tokens_fewer_than,
                     "keep captions with strictly fewer tokens than this");
  filter->add_option("--diagnostics", filter_args.diagnostics);
  filter->add_option("--run-manifest", filter_args.run_manifest);

  FigsplitArgs figsplit_args;
  auto* figsplit = app.add_subcommand(
      "figsplit", "separate compound figures and captions into panels");
  figsplit->add_option("--in", figsplit_args.input)->required();
  figsplit->add_option("--boxes", figsplit_args.boxes,
                       "detector box sidecar (JSONL)");
  figsplit->add_option("--images-dir", figsplit_args.images_dir,
                       "root directory for image_ref paths (PGM/PPM)");
  figsplit->add_option("--crops-dir", figsplit_args.crops_dir,
                       "output directory for panel crops");
  figsplit->add_option("--subfigs", figsplit_args.subfigs_out)->required();
  figsplit->add_option("--subcaps", figsplit_args.subcaps_out)->required();
  figsplit->add_option("--transform-endpoint",
                       figsplit_args.transform_endpoint,
                       "text-transform service URL");
  figsplit->add_option("--fixtures", figsplit_args.fixtures,
                       "replay fixtures instead of calling the service");
  figsplit->add_flag("--refine", figsplit_args.refine,
                     "also refine sub-captions through the service");
  figsplit->add_option("--dedup-iou", figsplit_args.dedup_iou)
      ->capture_default_str();
  figsplit->add_option("--jobs", figsplit_args.jobs,
                       "worker threads (0 = hardware)");
  figsplit->add_option("--timeout-ms", figsplit_args.timeout_ms)
      ->capture_default_str();
  figsplit->add_option("--diagnostics", figsplit_args.diagnostics);
  figsplit->add_option("--run-manifest", figsplit_args.run_manifest);

  AlignArgs align_args;
  auto* align = app.add_subcommand(
      "align", "match sub-figures to sub-captions by embedding similarity");
  align->add_option("--subfigs", align_args.subfigs)->required();
  align->add_option("--subcaps", align_args.subcaps)->required();
  align->add_option("--image-emb", align_args.image_emb)->required();
  align->add_option("--image-ids", align_args.image_ids)->required();
  align->add_option("--text-emb", align_args.text_emb)->required();
  align->add_option("--text-ids", align_args.text_ids)->required();
  align->add_option("--out", align_args.output)->required();
  align->add_option("--dropped", align_args.dropped);
  align->add_option("--min-similarity", align_args.min_similarity)
      ->capture_default_str();
  align->add_option("--jobs", align_args.jobs);
  align->add_option("--diagnostics", align_args.diagnostics);
  align->add_option("--run-manifest", align_args.run_manifest);

  InstructArgs instruct_args;
  auto* instruct = app.add_subcommand(
      "instruct", "generate instruction-following samples from aligned pairs");
  instruct->add_option("--pairs", instruct_args.pairs,
                       "aligned pairs (JSONL)");
  instruct->add_option("--out", instruct_args.output)->required();
  instruct->add_option("--serialized-out", instruct_args.serialized_out,
                       "also export serialized dialogues with response spans");
  instruct
      ->add_option("--families", instruct_args.families,
                   "description, conversation and/or invocation")
      ->delimiter(',')
      ->capture_default_str();
  instruct->add_option("--templates", instruct_args.templates,
                       "description instruction template pool (JSON)");
  instruct->add_option("--seed", instruct_args.seed)->capture_default_str();
  instruct->add_option("--scenarios", instruct_args.scenarios,
                       "invocation scenario file (JSONL)");
  instruct->add_option("--registry", instruct_args.registry,
                       "tool registry (JSONL)");
  instruct->add_option("--transform-endpoint",
                       instruct_args.transform_endpoint);
  instruct->add_option("--fixtures", instruct_args.fixtures);
  instruct->add_option("--timeout-ms", instruct_args.timeout_ms)
      ->capture_default_str();
  instruct->add_option("--diagnostics", instruct_args.diagnostics);
  instruct->add_option("--run-manifest", instruct_args.run_manifest);

  IndexBuildArgs index_build_args;
  auto* index_build = app.add_subcommand(
      "index-build", "cluster embeddings and build the IVF index");
  index_build->add_option("--emb", index_build_args.emb)->required();
  index_build->add_option("--ids", index_build_args.ids)->required();
  index_build->add_option("--out", index_build_args.output)->required();
  index_build->add_option("--k-centroids", index_build_args.k_centroids,
                          "0 = ceil(sqrt(n))");
  index_build->add_option("--max-iters", index_build_args.max_iters)
      ->capture_default_str();
  index_build->add_option("--seed", index_build_args.seed)
      ->capture_default_str();
  index_build->add_option("--run-manifest", index_build_args.run_manifest);

  IndexSearchArgs index_search_args;
  auto* index_search =
      app.add_subcommand("index-search", "query an IVF index");
  index_search->add_option("--index", index_search_args.index)->required();
  index_search
      ->add_option("--query-embedding", index_search_args.query_emb,
                   "EMB1 file; every row is searched")
      ->required();
  index_search->add_option("--k", index_search_args.k)
      ->capture_default_str();
  index_search
      ->add_option("--nprobe", index_search_args.nprobe,
                   "centroid lists to probe, or \"all\"")
      ->capture_default_str();
  index_search->add_option("--out", index_search_args.output,
                           "also write results as JSONL");
  index_search->add_option("--run-manifest", index_search_args.run_manifest);

  EvalRetrievalArgs eval_retrieval_args;
  auto* eval_retrieval = app.add_subcommand(
      "eval-retrieval", "R@k over ranked retrieval runs");
  eval_retrieval->add_option("--runs", eval_retrieval_args.runs)->required();
  eval_retrieval->add_option("--k", eval_retrieval_args.k)
      ->capture_default_str();
  eval_retrieval->add_option("--out", eval_retrieval_args.output,
                             "evaluation report (JSON)");
  eval_retrieval->add_option("--run-manifest",
                             eval_retrieval_args.run_manifest);

  EvalZeroshotArgs eval_zeroshot_args;
  auto* eval_zeroshot = app.add_subcommand(
      "eval-zeroshot", "zero-shot classification F1 via class prompts");
  eval_zeroshot->add_option("--image-emb", eval_zeroshot_args.image_emb)
      ->required();
  eval_zeroshot->add_option("--image-ids", eval_zeroshot_args.image_ids)
      ->required();
  eval_zeroshot->add_option("--prompt-emb", eval_zeroshot_args.prompt_emb)
      ->required();
  eval_zeroshot
      ->add_option("--labels", eval_zeroshot_args.labels,
                   "one class label per prompt row")
      ->required();
  eval_zeroshot
      ->add_option("--gold", eval_zeroshot_args.gold,
                   "gold labels (JSONL {id, label})")
      ->required();
  eval_zeroshot->add_option("--out", eval_zeroshot_args.output);
  eval_zeroshot->add_option("--run-manifest", eval_zeroshot_args.run_manifest);

  EvalVqaArgs eval_vqa_args;
  auto* eval_vqa = app.add_subcommand(
      "eval-vqa", "closed accuracy and open token-F1 over VQA answers");
  eval_vqa->add_option("--pred", eval_vqa_args.pred)->required();
  eval_vqa->add_option("--gold", eval_vqa_args.gold)->required();
  eval_vqa->add_option("--out", eval_vqa_args.output);
  eval_vqa->add_option("--run-manifest", eval_vqa_args.run_manifest);

  auto* score =
      app.add_subcommand("score", "loss utilities over exported tensors");
  score->require_subcommand(1);
  ScoreContrastiveArgs score_contrastive_args;
  auto* score_contrastive = score->add_subcommand(
      "contrastive", "symmetric InfoNCE over paired embeddings");
  score_contrastive->add_option("--emb-a", score_contrastive_args.emb_a)
      ->required();
  score_contrastive->add_option("--emb-b", score_contrastive_args.emb_b)
      ->required();
  score_contrastive
      ->add_option("--temperature", score_contrastive_args.temperature)
      ->capture_default_str();
  score_contrastive->add_option("--out", score_contrastive_args.output);
  score_contrastive->add_option("--run-manifest",
                                score_contrastive_args.run_manifest);
  ScoreNllArgs score_nll_args;
  auto* score_nll =
      score->add_subcommand("nll", "masked NLL over exported log-probs");
  score_nll->add_option("--logprobs", score_nll_args.logprobs)->required();
  score_nll->add_flag("--mean", score_nll_args.mean,
                      "mean reduction instead of the canonical sum");
  score_nll->add_option("--out", score_nll_args.output);
  score_nll->add_option("--run-manifest", score_nll_args.run_manifest);

  ServeArgs serve_args;
  auto* serve = app.add_subcommand(
      "serve", "retrieval + tool-invocation HTTP service");
  serve->add_option("--index", serve_args.index)->required();
  serve->add_option("--meta", serve_args.meta,
                    "abstract metadata (JSONL {id, title, abstract_text})");
  serve->add_option("--registry", serve_args.registry,
                    "tool registry (JSONL)");
  serve->add_option("--bind", serve_args.bind)->capture_default_str();
  serve->add_option("--embedder-endpoint", serve_args.embedder_endpoint,
                    "embedder URL for text queries");
  serve->add_option("--fixtures", serve_args.fixtures,
                    "replay fixtures for the embedder");
  serve->add_option("--timeout-ms", serve_args.timeout_ms)
      ->capture_default_str();
  serve->add_option("--run-manifest", serve_args.run_manifest);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) return cmd_ingest(ingest_args);
    if (*filter) return cmd_filter(filter_args);
    if (*figsplit) return cmd_figsplit(figsplit_args);
    if (*align) return cmd_align(align_args);
    if (*instruct) return cmd_instruct(instruct_args);
    if (*index_build) return cmd_index_build(index_build_args);
    if (*index_search) return cmd_index_search(index_search_args);
    if (*eval_retrieval) return cmd_eval_retrieval(eval_retrieval_args);
    if (*eval_zeroshot) return cmd_eval_zeroshot(eval_zeroshot_args);
    if (*eval_vqa) return cmd_eval_vqa(eval_vqa_args);
    if (*score_contrastive) return cmd_score_contrastive(score_contrastive_args);
    if (*score_nll) return cmd_score_nll(score_nll_args);
    if (*serve) return cmd_serve(serve_args);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << "no subcommand\n";
  return 1;
}
