#include "pathkit/align/align.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pathkit/core/error.hpp"
#include "pathkit/kernels/kernels.hpp"

namespace pathkit::align {

EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m) {
  EmbeddingMatrix out = m;
  for (std::size_t i = 0; i < out.n_rows; ++i) {
    float norm2 = kernels::squared_norm(out.row(i), out.dim);
    if (norm2 == 0.0f) {
      throw Error("l2_normalize: zero-norm row " + std::to_string(i));
    }
    kernels::scale(out.row(i), out.dim, 1.0f / std::sqrt(norm2));
  }
  out.unit_norm = true;
  return out;
}

SimilarityMatrix cosine_similarity_matrix(const EmbeddingMatrix& a,
                                          const EmbeddingMatrix& b) {
  if (a.dim != b.dim) {
    throw Error("cosine_similarity_matrix: dimension mismatch (" +
                std::to_string(a.dim) + " vs " + std::to_string(b.dim) + ")");
  }
  if (!a.unit_norm || !b.unit_norm) {
    throw Error("cosine_similarity_matrix: inputs must be unit-norm");
  }
  SimilarityMatrix s;
  s.rows = a.n_rows;
  s.cols = b.n_rows;
  s.values.resize(s.rows * s.cols);
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t j = 0; j < s.cols; ++j) {
      s.at(i, j) = kernels::dot(a.row(i), b.row(j), a.dim);
    }
  }
  return s;
}

namespace detail {

// Jonker-Volgenant style augmenting-path assignment; requires rows <= cols.
// Columns are scanned in ascending order with strict improvement, so exact
// ties resolve toward lower indices.
static std::vector<int> solve_rows_le_cols(const std::vector<double>& cost,
                                           std::size_t rows,
                                           std::size_t cols) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<std::size_t> p(cols + 1, 0), way(cols + 1, 0);
  for (std::size_t i = 1; i <= rows; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      std::size_t i0 = p[j0], j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        double cur = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(rows, -1);
  for (std::size_t j = 1; j <= cols; ++j) {
    if (p[j]) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  }
  return row_to_col;
}

std::vector<int> solve_min_cost(const std::vector<double>& cost,
                                std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) return std::vector<int>(rows, -1);
  if (rows <= cols) return solve_rows_le_cols(cost, rows, cols);
  std::vector<double> t(cols * rows);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) t[j * rows + i] = cost[i * cols + j];
  }
  std::vector<int> col_to_row = solve_rows_le_cols(t, cols, rows);
  std::vector<int> row_to_col(rows, -1);
  for (std::size_t j = 0; j < cols; ++j) {
    if (col_to_row[j] >= 0) {
      row_to_col[static_cast<std::size_t>(col_to_row[j])] =
          static_cast<int>(j);
    }
  }
  return row_to_col;
}

}  // namespace detail

namespace {

constexpr double kTieEps = 1e-9;
// Lexicographic tie refinement re-solves subproblems per (row, col); at
// panel scale that is negligible, past this size we keep the solver's own
// (already deterministic) matching.
constexpr std::size_t kRefineLimit = 64;

double matching_cost(const std::vector<double>& cost, std::size_t cols,
                     const std::vector<int>& row_to_col) {
  double total = 0.0;
  for (std::size_t r = 0; r < row_to_col.size(); ++r) {
    if (row_to_col[r] >= 0) {
      total += cost[r * cols + static_cast<std::size_t>(row_to_col[r])];
    }
  }
  return total;
}

// Optimal cost over `need` pairs among rows [first_row, rows) and the given
// columns; +inf when fewer than `need` pairs fit.
double best_completion(const std::vector<double>& cost, std::size_t rows,
                       std::size_t cols, std::size_t first_row,
                       const std::vector<std::size_t>& avail_cols,
                       std::size_t need) {
  std::size_t sub_rows = rows - first_row;
  if (std::min(sub_rows, avail_cols.size()) != need) {
    return std::numeric_limits<double>::infinity();
  }
  if (need == 0) return 0.0;
  std::vector<double> sub(sub_rows * avail_cols.size());
  for (std::size_t r = 0; r < sub_rows; ++r) {
    for (std::size_t c = 0; c < avail_cols.size(); ++c) {
      sub[r * avail_cols.size() + c] =
          cost[(first_row + r) * cols + avail_cols[c]];
    }
  }
  auto sol = detail::solve_min_cost(sub, sub_rows, avail_cols.size());
  return matching_cost(sub, avail_cols.size(), sol);
}

// Rebuilds the optimal matching choosing, row by row, the lowest column
// that still permits an optimal completion.
std::vector<int> lexicographic_refine(const std::vector<double>& cost,
                                      std::size_t rows, std::size_t cols,
                                      double optimal_total) {
  std::vector<int> result(rows, -1);
  std::vector<std::size_t> avail;
  for (std::size_t c = 0; c < cols; ++c) avail.push_back(c);
  std::size_t need = std::min(rows, cols);
  double fixed = 0.0;
  for (std::size_t r = 0; r < rows && need > 0; ++r) {
    bool placed = false;
    for (std::size_t ci = 0; ci < avail.size() && !placed; ++ci) {
      std::size_t c = avail[ci];
      std::vector<std::size_t> rest = avail;
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(ci));
      double total = fixed + cost[r * cols + c] +
                     best_completion(cost, rows, cols, r + 1, rest, need - 1);
      if (std::abs(total - optimal_total) <= kTieEps) {
        result[r] = static_cast<int>(c);
        fixed += cost[r * cols + c];
        avail = std::move(rest);
        --need;
        placed = true;
      }
    }
    // not placed: row r is unmatched in every optimal matching
  }
  return result;
}

}  // namespace

std::vector<Assignment> assign_pairs(const SimilarityMatrix& s,
                                     float min_similarity) {
  std::vector<Assignment> out;
  if (s.rows == 0 || s.cols == 0) return out;

  std::vector<double> cost(s.rows * s.cols);
  for (std::size_t i = 0; i < cost.size(); ++i) {
    cost[i] = -static_cast<double>(s.values[i]);
  }
  std::vector<int> row_to_col = detail::solve_min_cost(cost, s.rows, s.cols);
  if (std::max(s.rows, s.cols) <= kRefineLimit) {
    double optimal = matching_cost(cost, s.cols, row_to_col);
    std::vector<int> refined =
        lexicographic_refine(cost, s.rows, s.cols, optimal);
    std::size_t matched = 0;
    for (int c : refined) matched += c >= 0 ? 1 : 0;
    // eps trouble could leave the refinement short; keep the solver matching
    // in that case rather than returning a smaller one
    if (matched == std::min(s.rows, s.cols)) row_to_col = std::move(refined);
  }
  for (std::size_t r = 0; r < s.rows; ++r) {
    if (row_to_col[r] < 0) continue;
    auto c = static_cast<std::size_t>(row_to_col[r]);
    float sim = s.at(r, c);
    if (sim < min_similarity) continue;
    out.push_back({r, c, sim});
  }
  return out;
}

ojson aligned_pair_to_json(const AlignedPair& p) {
  ojson obj;
  obj["parent_record_id"] = p.parent_record_id;
  obj["panel_index"] = p.panel_index;
  obj["panel_label"] = p.panel_label;
  obj["crop_ref"] = p.crop_ref;
  obj["caption"] = p.caption;
  obj["similarity"] = p.similarity;
  return obj;
}

AlignedPair aligned_pair_from_json(const ojson& obj) {
  AlignedPair p;
  p.parent_record_id = obj.at("parent_record_id").get<std::string>();
  p.panel_index = obj.at("panel_index").get<int>();
  p.panel_label = obj.value("panel_label", std::string());
  p.crop_ref = obj.value("crop_ref", std::string());
  p.caption = obj.at("caption").get<std::string>();
  p.similarity = obj.at("similarity").get<double>();
  return p;
}

std::pair<std::vector<AlignedPair>, std::vector<AlignedPair>> drop_weak_pairs(
    const std::vector<AlignedPair>& pairs, double min_similarity) {
  std::vector<AlignedPair> kept, dropped;
  for (const auto& p : pairs) {
    (p.similarity >= min_similarity ? kept : dropped).push_back(p);
  }
  return {std::move(kept), std::move(dropped)};
}

}  // namespace pathkit::align
