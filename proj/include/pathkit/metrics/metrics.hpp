#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pathkit/align/align.hpp"
#include "pathkit/core/embedding.hpp"
#include "pathkit/core/jsonl.hpp"

namespace pathkit::metrics {

// Symmetric InfoNCE over a square similarity matrix whose diagonal holds the
// matched pairs: the mean of the image-to-text and text-to-image
// cross-entropies of softmax(s/temperature) against the diagonal.
double contrastive_loss(const align::SimilarityMatrix& s, double temperature);

// Natural-log probabilities (<= 0) for the response sequence positions, with
// the response-only mask.
struct TokenLogProbs {
  std::vector<double> values;
  std::vector<bool> mask;
};

// -sum of masked log-probs. A sum across timesteps, not a mean; the mean
// variant is opt-in for trainer convenience.
double masked_nll(const TokenLogProbs& lp, bool mean_reduction = false);

struct RankedQuery {
  std::vector<std::string> ranked_ids;  // best first
  std::string gold_id;
};

// Fraction of queries whose gold id appears in the first min(k, list size)
// entries.
double recall_at_k(const std::vector<RankedQuery>& results, std::size_t k);

// Substitutes the label into a template containing exactly one "{}"
// placeholder ("tumor" + "A H&E image of a {}." -> "A H&E image of a tumor.").
std::string prompt_from_label(const std::string& label,
                              const std::string& tmpl);

// Argmax cosine against the class-prompt rows; exact ties pick the lowest
// index.
std::size_t zero_shot_classify(const float* image_emb, std::size_t dim,
                               const EmbeddingMatrix& class_prompt_embs);

// True class x predicted class counts.
struct ConfusionCounts {
  std::vector<std::string> labels;
  std::vector<std::uint64_t> counts;  // labels.size()^2, row-major by true

  std::uint64_t at(std::size_t truth, std::size_t pred) const {
    return counts[truth * labels.size() + pred];
  }
  std::uint64_t& at(std::size_t truth, std::size_t pred) {
    return counts[truth * labels.size() + pred];
  }
};

ConfusionCounts make_confusion(const std::vector<std::string>& labels);

struct F1Scores {
  std::vector<double> per_class;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;  // support-weighted
};

// Per-class F1 = 2PR/(P+R), 0 when P+R = 0. Macro averages every class;
// weighted weighs by true-class support (zero-support classes drop out).
F1Scores f1_scores(const ConfusionCounts& c);

// Closed-ended VQA: normalization is lowercase, trim, strip terminal
// punctuation; exact match only. Gold must normalize to yes/no.
int vqa_closed_accuracy(const std::string& pred, const std::string& gold);

// Open-ended VQA: token-overlap F1 over normalized whitespace tokens with
// multiset overlap. This is the reading-comprehension convention and is not
// comparable to other F1 definitions.
double vqa_open_f1(const std::string& pred, const std::string& gold);

// Evaluation report: JSON with metric name, value, parameters and input
// digests, plus notes surfacing metric-definition choices.
struct EvalReport {
  std::string metric;
  double value = 0.0;
  ojson params = ojson::object();
  std::vector<std::string> input_paths;
  std::vector<std::string> notes;
  ojson extra = ojson::object();  // per-class detail etc.
};

void write_report(const std::string& path, const EvalReport& report);

}  // namespace pathkit::metrics
