#include <iostream>
#include <map>

#include "pathkit/align/align.hpp"
#include "pathkit/core/embedding.hpp"
#include "pathkit/metrics/metrics.hpp"

#include "cli_common.hpp"
#include "commands.hpp"

namespace pathkit::cli {

namespace {

const char* kAveragingNote =
    "macro and weighted F1 are both reported; comparisons elsewhere use "
    "weighted by default";
const char* kOpenF1Note =
    "open-ended F1 is whitespace-token multiset overlap "
    "(reading-comprehension convention); not comparable to other F1 "
    "definitions";

}  // namespace

int cmd_eval_retrieval(const EvalRetrievalArgs& args) {
  std::string manifest_path =
      args.run_manifest.empty()
          ? default_manifest_path(args.output, "eval-retrieval")
          : args.run_manifest;
  RunManifest manifest("eval-retrieval", manifest_path);
  manifest.set_config({{"runs", args.runs}, {"k", args.k}});

  std::vector<metrics::RankedQuery> queries;
  validated([&] {
    for_each_jsonl_file(args.runs, [&](std::size_t offset, const ojson& obj) {
      if (!obj.contains("gold_id") || !obj.contains("ranked")) {
        throw FramingError("runs line missing gold_id/ranked", offset);
      }
      metrics::RankedQuery q;
      q.gold_id = obj["gold_id"].is_string()
                      ? obj["gold_id"].get<std::string>()
                      : obj["gold_id"].dump();
      for (const auto& entry : obj["ranked"]) {
        if (entry.is_object()) {
          q.ranked_ids.push_back(entry["id"].is_string()
                                     ? entry["id"].get<std::string>()
                                     : entry["id"].dump());
        } else {
          q.ranked_ids.push_back(
              entry.is_string() ? entry.get<std::string>() : entry.dump());
        }
      }
      queries.push_back(std::move(q));
    });
    return 0;
  });
  manifest.add_input(args.runs);

  double recall = metrics::recall_at_k(queries, args.k);
  std::string metric = "R@" + std::to_string(args.k);
  std::cout << metric << " = " << recall << " over " << queries.size()
            << " queries\n";
  if (!args.output.empty()) {
    metrics::EvalReport report;
    report.metric = metric;
    report.value = recall;
    report.params = {{"k", args.k}, {"queries", queries.size()}};
    report.input_paths = {args.runs};
    metrics::write_report(args.output, report);
    manifest.add_output(args.output);
  }
  manifest.set_count("queries", queries.size());
  manifest.write();
  return 0;
}

int cmd_eval_zeroshot(const EvalZeroshotArgs& args) {
  std::string manifest_path =
      args.run_manifest.empty()
          ? default_manifest_path(args.output, "eval-zeroshot")
          : args.run_manifest;
  RunManifest manifest("eval-zeroshot", manifest_path);
  manifest.set_config({{"image_emb", args.image_emb},
                       {"prompt_emb", args.prompt_emb},
                       {"labels", args.labels},
                       {"gold", args.gold}});

  auto images = validated([&] {
    return align::l2_normalize(load_embeddings(args.image_emb));
  });
  auto image_ids = validated([&] { return load_ids(args.image_ids); });
  auto prompts = validated([&] {
    return align::l2_normalize(load_embeddings(args.prompt_emb));
  });
  auto labels = validated([&] { return load_ids(args.labels); });
  if (labels.size() != prompts.n_rows) {
    throw ValidationError("label count does not match prompt embedding rows");
  }
  if (image_ids.size() != images.n_rows) {
    throw ValidationError("image id count does not match embedding rows");
  }
  std::map<std::string, std::size_t> label_index;
  for (std::size_t i = 0; i < labels.size(); ++i) label_index[labels[i]] = i;

  std::map<std::string, std::string> gold;
  validated([&] {
    for_each_jsonl_file(args.gold, [&](std::size_t offset, const ojson& obj) {
      if (!obj.contains("id") || !obj.contains("label")) {
        throw FramingError("gold line missing id/label", offset);
      }
      gold[obj["id"].get<std::string>()] = obj["label"].get<std::string>();
    });
    return 0;
  });
  manifest.add_input(args.image_emb);
  manifest.add_input(args.prompt_emb);
  manifest.add_input(args.labels);
  manifest.add_input(args.gold);

  auto confusion = metrics::make_confusion(labels);
  std::size_t evaluated = 0, correct = 0;
  for (std::size_t i = 0; i < images.n_rows; ++i) {
    auto git = gold.find(image_ids[i]);
    if (git == gold.end()) continue;
    auto lit = label_index.find(git->second);
    if (lit == label_index.end()) {
      throw ValidationError("gold label not in label list: " + git->second);
    }
    std::size_t predicted =
        metrics::zero_shot_classify(images.row(i), images.dim, prompts);
    confusion.at(lit->second, predicted)++;
    ++evaluated;
    correct += predicted == lit->second ? 1 : 0;
  }
  if (evaluated == 0) throw ValidationError("no gold-labeled images found");

  auto f1 = metrics::f1_scores(confusion);
  std::cout << "zero-shot: weighted F1 " << f1.weighted_f1 << ", macro F1 "
            << f1.macro_f1 << " over " << evaluated << " images\n";
  if (!args.output.empty()) {
    metrics::EvalReport report;
    report.metric = "zero_shot_weighted_f1";
    report.value = f1.weighted_f1;
    report.params = {{"classes", labels.size()}, {"images", evaluated}};
    report.input_paths = {args.image_emb, args.prompt_emb, args.labels,
                          args.gold};
    report.notes = {kAveragingNote};
    ojson per_class = ojson::object();
    for (std::size_t c = 0; c < labels.size(); ++c) {
      per_class[labels[c]] = f1.per_class[c];
    }
    report.extra = {{"macro_f1", f1.macro_f1},
                    {"accuracy", static_cast<double>(correct) / evaluated},
                    {"per_class_f1", per_class}};
    metrics::write_report(args.output, report);
    manifest.add_output(args.output);
  }
  manifest.set_count("images", evaluated);
  manifest.write();
  return 0;
}

int cmd_eval_vqa(const EvalVqaArgs& args) {
  std::string manifest_path =
      args.run_manifest.empty()
          ? default_manifest_path(args.output, "eval-vqa")
          : args.run_manifest;
  RunManifest manifest("eval-vqa", manifest_path);
  manifest.set_config({{"pred", args.pred}, {"gold", args.gold}});

  std::map<std::string, std::string> predictions;
  validated([&] {
    for_each_jsonl_file(args.pred, [&](std::size_t offset, const ojson& obj) {
      if (!obj.contains("question_id") || !obj.contains("answer")) {
        throw FramingError("prediction line missing question_id/answer",
                           offset);
      }
      predictions[obj["question_id"].get<std::string>()] =
          obj["answer"].get<std::string>();
    });
    return 0;
  });
  manifest.add_input(args.pred);
  manifest.add_input(args.gold);

  DiagnosticsSink diags;
  std::size_t closed_total = 0, closed_correct = 0, open_total = 0;
  double open_f1_sum = 0.0;
  validated([&] {
    for_each_jsonl_file(args.gold, [&](std::size_t offset, const ojson& obj) {
      if (!obj.contains("question_id") || !obj.contains("type") ||
          !obj.contains("answer")) {
        throw FramingError("gold line missing question_id/type/answer",
                           offset);
      }
      std::string qid = obj["question_id"].get<std::string>();
      std::string type = obj["type"].get<std::string>();
      std::string answer = obj["answer"].get<std::string>();
      auto pit = predictions.find(qid);
      std::string pred;
      if (pit == predictions.end()) {
        diags.add("eval-vqa", qid, "missing prediction, scored 0");
      } else {
        pred = pit->second;
      }
      if (type == "closed") {
        ++closed_total;
        closed_correct +=
            static_cast<std::size_t>(metrics::vqa_closed_accuracy(pred, answer));
      } else if (type == "open") {
        ++open_total;
        open_f1_sum += metrics::vqa_open_f1(pred, answer);
      } else {
        throw Error("unknown question type: " + type);
      }
    });
    return 0;
  });

  double closed_acc =
      closed_total ? static_cast<double>(closed_correct) / closed_total : 0.0;
  double open_f1 = open_total ? open_f1_sum / open_total : 0.0;
  std::cout << "vqa: closed accuracy " << closed_acc << " (" << closed_total
            << " q), open F1 " << open_f1 << " (" << open_total << " q)\n";
  if (!args.output.empty()) {
    metrics::EvalReport report;
    report.metric = "vqa_closed_accuracy";
    report.value = closed_acc;
    report.params = {{"closed_questions", closed_total},
                     {"open_questions", open_total}};
    report.input_paths = {args.pred, args.gold};
    report.notes = {kOpenF1Note};
    report.extra = {{"open_f1", open_f1}};
    metrics::write_report(args.output, report);
    manifest.add_output(args.output);
  }
  std::string diag_path =
      args.output.empty() ? "eval-vqa.diagnostics.jsonl"
                          : args.output + ".diagnostics.jsonl";
  diags.write_file(diag_path);
  manifest.set_diagnostics(diag_path, diags);
  manifest.set_count("closed", closed_total);
  manifest.set_count("open", open_total);
  manifest.write();
  return 0;
}

int cmd_score_contrastive(const ScoreContrastiveArgs& args) {
  std::string manifest_path =
      args.run_manifest.empty()
          ? default_manifest_path(args.output, "score-contrastive")
          : args.run_manifest;
  RunManifest manifest("score", manifest_path);
  manifest.set_config({{"emb_a", args.emb_a},
                       {"emb_b", args.emb_b},
                       {"temperature", args.temperature}});

  auto a = validated([&] {
    return align::l2_normalize(load_embeddings(args.emb_a));
  });
  auto b = validated([&] {
    return align::l2_normalize(load_embeddings(args.emb_b));
  });
  if (a.n_rows != b.n_rows) {
    throw ValidationError("contrastive loss needs matched batches (" +
                          std::to_string(a.n_rows) + " vs " +
                          std::to_string(b.n_rows) + " rows)");
  }
  manifest.add_input(args.emb_a);
  manifest.add_input(args.emb_b);

  auto sim = align::cosine_similarity_matrix(a, b);
  double loss = metrics::contrastive_loss(sim, args.temperature);
  std::cout << "contrastive_loss = " << loss << " (temperature "
            << args.temperature << ", batch " << a.n_rows << ")\n";
  if (!args.output.empty()) {
    metrics::EvalReport report;
    report.metric = "contrastive_loss";
    report.value = loss;
    report.params = {{"temperature", args.temperature},
                     {"batch", a.n_rows}};
    report.input_paths = {args.emb_a, args.emb_b};
    metrics::write_report(args.output, report);
    manifest.add_output(args.output);
  }
  manifest.set_count("batch", a.n_rows);
  manifest.write();
  return 0;
}

int cmd_score_nll(const ScoreNllArgs& args) {
  std::string manifest_path =
      args.run_manifest.empty()
          ? default_manifest_path(args.output, "score-nll")
          : args.run_manifest;
  RunManifest manifest("score", manifest_path);
  manifest.set_config({{"logprobs", args.logprobs}, {"mean", args.mean}});

  double total = 0.0;
  std::size_t sequences = 0;
  validated([&] {
    for_each_jsonl_file(
        args.logprobs, [&](std::size_t offset, const ojson& obj) {
          if (!obj.contains("values") || !obj.contains("mask")) {
            throw FramingError("logprobs line missing values/mask", offset);
          }
          metrics::TokenLogProbs lp;
          lp.values = obj["values"].get<std::vector<double>>();
          lp.mask = obj["mask"].get<std::vector<bool>>();
          total += metrics::masked_nll(lp, args.mean);
          ++sequences;
        });
    return 0;
  });
  manifest.add_input(args.logprobs);

  std::cout << "masked_nll = " << total << " over " << sequences
            << " sequences" << (args.mean ? " (mean reduction)" : "") << "\n";
  if (!args.output.empty()) {
    metrics::EvalReport report;
    report.metric = args.mean ? "masked_nll_mean" : "masked_nll";
    report.value = total;
    report.params = {{"sequences", sequences}, {"mean", args.mean}};
    report.input_paths = {args.logprobs};
    metrics::write_report(args.output, report);
    manifest.add_output(args.output);
  }
  manifest.set_count("sequences", sequences);
  manifest.write();
  return 0;
}

}  // namespace pathkit::cli
