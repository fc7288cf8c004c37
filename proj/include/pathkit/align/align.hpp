#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pathkit/core/embedding.hpp"
#include "pathkit/core/jsonl.hpp"

namespace pathkit::align {

// rows x cols cosine similarities; values in [-1, 1] for unit-norm inputs.
struct SimilarityMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  float at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  float& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
};

// Scales every row to unit L2 norm and sets the unit_norm flag.
// Throws naming the row index when a row has zero norm.
EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m);

// values[i][j] = dot(a[i], b[j]). Both inputs must be unit-norm and share
// a dimension.
SimilarityMatrix cosine_similarity_matrix(const EmbeddingMatrix& a,
                                          const EmbeddingMatrix& b);

struct Assignment {
  std::size_t row = 0;
  std::size_t col = 0;
  float similarity = 0.0f;
};

// Optimal rectangular assignment maximizing total similarity over all
// one-to-one matchings of size min(rows, cols), then dropping pairs below
// min_similarity. Among equal-total optima the matching that is
// lexicographically smallest in (row, col) wins. Output sorted by row.
std::vector<Assignment> assign_pairs(const SimilarityMatrix& s,
                                     float min_similarity);

// A sub-figure matched to a sub-caption; the curated dataset unit.
struct AlignedPair {
  std::string parent_record_id;
  int panel_index = 0;
  std::string panel_label;
  std::string crop_ref;
  std::string caption;
  double similarity = 0.0;
};

ojson aligned_pair_to_json(const AlignedPair& p);
AlignedPair aligned_pair_from_json(const ojson& obj);

// Partition by similarity >= min_similarity, order-preserving.
std::pair<std::vector<AlignedPair>, std::vector<AlignedPair>> drop_weak_pairs(
    const std::vector<AlignedPair>& pairs, double min_similarity);

namespace detail {
// Min-cost assignment over a rows x cols matrix (row-major, any shape);
// returns col index per row, -1 for unmatched rows. Exposed for the
// brute-force oracle tests.
std::vector<int> solve_min_cost(const std::vector<double>& cost,
                                std::size_t rows, std::size_t cols);
}  // namespace detail

}  // namespace pathkit::align
