#include "pathkit/metrics/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <map>

#include "pathkit/core/digest.hpp"
#include "pathkit/core/error.hpp"
#include "pathkit/kernels/kernels.hpp"

namespace pathkit::metrics {

namespace {

// log(sum(exp(x))) with max-shift for stability
double logsumexp(const std::vector<double>& x) {
  double m = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - m);
  return m + std::log(sum);
}

}  // namespace

double contrastive_loss(const align::SimilarityMatrix& s, double temperature) {
  if (s.rows != s.cols) {
    throw Error("contrastive_loss: matrix must be square");
  }
  if (temperature <= 0.0) {
    throw Error("contrastive_loss: temperature must be positive");
  }
  std::size_t n = s.rows;
  if (n == 0) throw Error("contrastive_loss: empty matrix");

  std::vector<double> scaled(n);
  double image_to_text = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      scaled[j] = static_cast<double>(s.at(i, j)) / temperature;
    }
    image_to_text += logsumexp(scaled) - scaled[i];
  }
  double text_to_image = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = static_cast<double>(s.at(i, j)) / temperature;
    }
    text_to_image += logsumexp(scaled) - scaled[j];
  }
  return 0.5 * (image_to_text + text_to_image) / static_cast<double>(n);
}

double masked_nll(const TokenLogProbs& lp, bool mean_reduction) {
  if (lp.values.size() != lp.mask.size()) {
    throw Error("masked_nll: values/mask length mismatch");
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < lp.values.size(); ++t) {
    if (lp.values[t] > 0.0) {
      throw Error("masked_nll: log-probability above 0 at position " +
                  std::to_string(t));
    }
    if (lp.mask[t]) {
      sum -= lp.values[t];
      ++count;
    }
  }
  if (mean_reduction) return count == 0 ? 0.0 : sum / count;
  return sum;
}

double recall_at_k(const std::vector<RankedQuery>& results, std::size_t k) {
  if (k < 1) throw Error("recall_at_k: k must be >= 1");
  if (results.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& q : results) {
    std::size_t take = std::min(k, q.ranked_ids.size());
    for (std::size_t i = 0; i < take; ++i) {
      if (q.ranked_ids[i] == q.gold_id) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / results.size();
}

std::string prompt_from_label(const std::string& label,
                              const std::string& tmpl) {
  std::size_t first = tmpl.find("{}");
  if (first == std::string::npos) {
    throw Error("prompt template has no {} placeholder");
  }
  if (tmpl.find("{}", first + 2) != std::string::npos) {
    throw Error("prompt template has multiple {} placeholders");
  }
  return tmpl.substr(0, first) + label + tmpl.substr(first + 2);
}

std::size_t zero_shot_classify(const float* image_emb, std::size_t dim,
                               const EmbeddingMatrix& class_prompt_embs) {
  if (class_prompt_embs.n_rows == 0) {
    throw Error("zero_shot_classify: no class prompts");
  }
  if (class_prompt_embs.dim != dim) {
    throw Error("zero_shot_classify: dimension mismatch");
  }
  std::size_t best = 0;
  float best_score =
      kernels::dot(image_emb, class_prompt_embs.row(0), dim);
  for (std::size_t c = 1; c < class_prompt_embs.n_rows; ++c) {
    float score = kernels::dot(image_emb, class_prompt_embs.row(c), dim);
    if (score > best_score) {
      best_score = score;
      best = c;
    }
  }
  return best;
}

ConfusionCounts make_confusion(const std::vector<std::string>& labels) {
  ConfusionCounts c;
  c.labels = labels;
  c.counts.assign(labels.size() * labels.size(), 0);
  return c;
}

F1Scores f1_scores(const ConfusionCounts& c) {
  std::size_t n = c.labels.size();
  std::uint64_t total = 0;
  for (auto v : c.counts) total += v;
  if (n == 0 || total == 0) {
    throw Error("f1_scores: confusion matrix has no counts");
  }
  F1Scores out;
  out.per_class.resize(n, 0.0);
  double weighted_sum = 0.0;
  std::uint64_t support_total = 0;
  for (std::size_t k = 0; k < n; ++k) {
    std::uint64_t tp = c.at(k, k);
    std::uint64_t support = 0, predicted = 0;
    for (std::size_t j = 0; j < n; ++j) {
      support += c.at(k, j);
      predicted += c.at(j, k);
    }
    double precision = predicted ? static_cast<double>(tp) / predicted : 0.0;
    double recall = support ? static_cast<double>(tp) / support : 0.0;
    double f1 = precision + recall > 0.0
                    ? 2.0 * precision * recall / (precision + recall)
                    : 0.0;
    out.per_class[k] = f1;
    out.macro_f1 += f1;
    weighted_sum += f1 * static_cast<double>(support);
    support_total += support;
  }
  out.macro_f1 /= static_cast<double>(n);
  out.weighted_f1 = weighted_sum / static_cast<double>(support_total);
  return out;
}

namespace {

std::string normalize_answer(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char ch : s) {
    out.push_back(static_cast<char>(std::tolower(ch)));
  }
  std::size_t begin = out.find_first_not_of(" \t\r\n");
  std::size_t end = out.find_last_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  out = out.substr(begin, end - begin + 1);
  while (!out.empty() && std::strchr(".,!?;:", out.back()) != nullptr) {
    out.pop_back();
  }
  return out;
}

std::vector<std::string> normalized_tokens(const std::string& s) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    // strip punctuation hugging the token edges
    std::size_t b = 0, e = current.size();
    auto is_punct = [](char c) {
      return std::strchr(".,!?;:()[]\"'", c) != nullptr;
    };
    while (b < e && is_punct(current[b])) ++b;
    while (e > b && is_punct(current[e - 1])) --e;
    if (e > b) tokens.push_back(current.substr(b, e - b));
    current.clear();
  };
  for (unsigned char ch : s) {
    if (std::isspace(ch)) {
      flush();
    } else {
      current.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  flush();
  return tokens;
}

}  // namespace

int vqa_closed_accuracy(const std::string& pred, const std::string& gold) {
  std::string ngold = normalize_answer(gold);
  if (ngold != "yes" && ngold != "no") {
    throw Error("closed-ended gold answer must normalize to yes/no, got \"" +
                gold + "\"");
  }
  return normalize_answer(pred) == ngold ? 1 : 0;
}

double vqa_open_f1(const std::string& pred, const std::string& gold) {
  auto pred_tokens = normalized_tokens(pred);
  auto gold_tokens = normalized_tokens(gold);
  if (pred_tokens.empty() || gold_tokens.empty()) return 0.0;
  std::map<std::string, std::size_t> gold_counts;
  for (const auto& t : gold_tokens) gold_counts[t]++;
  std::size_t overlap = 0;
  for (const auto& t : pred_tokens) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      ++overlap;
      --it->second;
    }
  }
  if (overlap == 0) return 0.0;
  double precision = static_cast<double>(overlap) / pred_tokens.size();
  double recall = static_cast<double>(overlap) / gold_tokens.size();
  return 2.0 * precision * recall / (precision + recall);
}

void write_report(const std::string& path, const EvalReport& report) {
  ojson obj;
  obj["metric"] = report.metric;
  obj["value"] = report.value;
  obj["params"] = report.params;
  ojson inputs = ojson::array();
  for (const auto& p : report.input_paths) {
    ojson entry;
    entry["path"] = p;
    entry["digest"] = file_digest(p);
    inputs.push_back(entry);
  }
  obj["inputs"] = inputs;
  if (!report.notes.empty()) obj["notes"] = report.notes;
  for (auto it = report.extra.begin(); it != report.extra.end(); ++it) {
    obj[it.key()] = it.value();
  }
  write_file_atomic(path, obj.dump(2) + "\n");
}

}  // namespace pathkit::metrics
