#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <set>

#include "pathkit/align/align.hpp"
#include "pathkit/core/error.hpp"
#include "testutil.hpp"

using namespace pathkit;
using namespace pathkit::align;

namespace {

SimilarityMatrix make_sim(std::size_t rows, std::size_t cols,
                          std::vector<float> values) {
  SimilarityMatrix s;
  s.rows = rows;
  s.cols = cols;
  s.values = std::move(values);
  return s;
}

// Exhaustive search over all injective row->col mappings of size
// min(rows, cols); the oracle assign_pairs is tested against.
void brute_force_rec(const SimilarityMatrix& s, std::size_t row,
                     std::size_t placed, std::vector<char>& used_cols,
                     double sum, double& best) {
  std::size_t need = std::min(s.rows, s.cols);
  if (placed == need) {
    best = std::max(best, sum);
    return;
  }
  if (row == s.rows) return;
  if (s.rows - row < need - placed) return;  // cannot finish
  // leave this row unmatched (only possible when rows > cols)
  if (s.rows - row > need - placed) {
    brute_force_rec(s, row + 1, placed, used_cols, sum, best);
  }
  for (std::size_t c = 0; c < s.cols; ++c) {
    if (used_cols[c]) continue;
    used_cols[c] = 1;
    brute_force_rec(s, row + 1, placed + 1, used_cols,
                    sum + static_cast<double>(s.at(row, c)), best);
    used_cols[c] = 0;
  }
}

double brute_force_max(const SimilarityMatrix& s) {
  std::vector<char> used(s.cols, 0);
  double best = -1e18;
  brute_force_rec(s, 0, 0, used, 0.0, best);
  return best;
}

double total_similarity(const std::vector<Assignment>& m) {
  double sum = 0.0;
  for (const auto& a : m) sum += static_cast<double>(a.similarity);
  return sum;
}

}  // namespace

TEST_CASE("l2_normalize scales a 3-4-5 row to (0.6, 0.8)") {
  EmbeddingMatrix m;
  m.n_rows = 1;
  m.dim = 2;
  m.values = {3.0f, 4.0f};
  auto out = l2_normalize(m);
  CHECK(out.unit_norm);
  CHECK(out.values[0] == doctest::Approx(0.6).epsilon(1e-6));
  CHECK(out.values[1] == doctest::Approx(0.8).epsilon(1e-6));
}

TEST_CASE("l2_normalize is idempotent within 1e-7") {
  auto m = testutil::random_embeddings(6, 17, 99);
  auto once = l2_normalize(m);
  auto twice = l2_normalize(once);
  for (std::size_t i = 0; i < once.values.size(); ++i) {
    CHECK(std::abs(once.values[i] - twice.values[i]) < 1e-7f);
  }
}

TEST_CASE("l2_normalize reports the zero-norm row index") {
  EmbeddingMatrix m;
  m.n_rows = 2;
  m.dim = 2;
  m.values = {1.0f, 0.0f, 0.0f, 0.0f};
  try {
    l2_normalize(m);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 1") != std::string::npos);
  }
}

TEST_CASE("cosine of identical unit rows is 1, of orthogonal rows 0") {
  auto a = testutil::basis_embeddings(1, 4, 0);
  auto same = cosine_similarity_matrix(a, a);
  CHECK(same.at(0, 0) == doctest::Approx(1.0));
  auto b = testutil::basis_embeddings(1, 4, 1);
  auto ortho = cosine_similarity_matrix(a, b);
  CHECK(ortho.at(0, 0) == doctest::Approx(0.0));
}

TEST_CASE("cosine matrix matches the scalar triple-loop oracle") {
  auto a = l2_normalize(testutil::random_embeddings(2, 9, 1));
  auto b = l2_normalize(testutil::random_embeddings(3, 9, 2));
  auto s = cosine_similarity_matrix(a, b);
  REQUIRE(s.rows == 2);
  REQUIRE(s.cols == 3);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      double expect = 0.0;
      for (std::size_t d = 0; d < 9; ++d) {
        expect += static_cast<double>(a.row(i)[d]) * b.row(j)[d];
      }
      CHECK(s.at(i, j) == doctest::Approx(expect).epsilon(1e-6));
    }
  }
}

TEST_CASE("cosine matrix transposes symmetrically") {
  auto a = l2_normalize(testutil::random_embeddings(4, 12, 3));
  auto b = l2_normalize(testutil::random_embeddings(5, 12, 4));
  auto ab = cosine_similarity_matrix(a, b);
  auto ba = cosine_similarity_matrix(b, a);
  for (std::size_t i = 0; i < ab.rows; ++i) {
    for (std::size_t j = 0; j < ab.cols; ++j) {
      CHECK(std::abs(ab.at(i, j) - ba.at(j, i)) < 1e-7f);
    }
  }
}

TEST_CASE("cosine matrix rejects dimension mismatches and raw inputs") {
  auto a = l2_normalize(testutil::random_embeddings(2, 8, 5));
  auto b = l2_normalize(testutil::random_embeddings(2, 9, 6));
  CHECK_THROWS_AS(cosine_similarity_matrix(a, b), Error);
  auto raw = testutil::random_embeddings(2, 8, 7);
  CHECK_THROWS_AS(cosine_similarity_matrix(a, raw), Error);
}

TEST_CASE("assign_pairs picks the diagonal on the spec example") {
  auto s = make_sim(2, 2, {0.9f, 0.1f, 0.2f, 0.8f});
  auto m = assign_pairs(s, 0.0f);
  REQUIRE(m.size() == 2);
  CHECK(m[0].row == 0);
  CHECK(m[0].col == 0);
  CHECK(m[1].row == 1);
  CHECK(m[1].col == 1);
  CHECK(total_similarity(m) == doctest::Approx(1.7));
  CHECK(total_similarity(m) == doctest::Approx(brute_force_max(s)));
}

TEST_CASE("one figure, two captions takes the argmax") {
  auto s = make_sim(1, 2, {0.9f, 0.85f});
  auto m = assign_pairs(s, 0.0f);
  REQUIRE(m.size() == 1);
  CHECK(m[0].row == 0);
  CHECK(m[0].col == 0);
  CHECK(m[0].similarity == 0.9f);
}

TEST_CASE("threshold removes weak pairs after matching") {
  auto s = make_sim(2, 2, {0.9f, 0.1f, 0.2f, 0.8f});
  auto m = assign_pairs(s, 0.85f);
  REQUIRE(m.size() == 1);
  CHECK(m[0].row == 0);
  CHECK(m[0].col == 0);
}

TEST_CASE("empty matrix yields an empty matching") {
  CHECK(assign_pairs(make_sim(0, 0, {}), 0.0f).empty());
  CHECK(assign_pairs(make_sim(0, 3, {}), 0.0f).empty());
}

TEST_CASE("exact ties resolve to the lexicographically smallest matching") {
  auto s = make_sim(2, 2, {0.5f, 0.5f, 0.5f, 0.5f});
  auto m = assign_pairs(s, 0.0f);
  REQUIRE(m.size() == 2);
  CHECK(m[0].row == 0);
  CHECK(m[0].col == 0);
  CHECK(m[1].col == 1);

  // rectangular case: two equal-total optima, the lower columns win
  auto s2 = make_sim(2, 3, {0.5f, 0.5f, 0.2f, 0.5f, 0.5f, 0.2f});
  auto m2 = assign_pairs(s2, 0.0f);
  REQUIRE(m2.size() == 2);
  CHECK(m2[0].row == 0);
  CHECK(m2[0].col == 0);
  CHECK(m2[1].row == 1);
  CHECK(m2[1].col == 1);
}

TEST_CASE("matching equals exhaustive search on random matrices up to 6x6") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (int trial = 0; trial < 120; ++trial) {
    std::size_t rows = 1 + rng() % 6;
    std::size_t cols = 1 + rng() % 6;
    std::vector<float> values(rows * cols);
    for (auto& v : values) v = dist(rng);
    auto s = make_sim(rows, cols, values);
    auto m = assign_pairs(s, -2.0f);
    CHECK(m.size() == std::min(rows, cols));
    CHECK(total_similarity(m) == doctest::Approx(brute_force_max(s)).epsilon(1e-9));

    // injective on both sides
    std::set<std::size_t> seen_rows, seen_cols;
    for (const auto& a : m) {
      CHECK(seen_rows.insert(a.row).second);
      CHECK(seen_cols.insert(a.col).second);
    }
  }
}

TEST_CASE("positive row scaling of raw embeddings leaves the matching unchanged") {
  std::mt19937_64 rng(7);
  auto raw_a = testutil::random_embeddings(4, 16, 71);
  auto raw_b = testutil::random_embeddings(4, 16, 72);
  auto scaled_a = raw_a;
  auto scaled_b = raw_b;
  std::uniform_real_distribution<float> scale(0.1f, 10.0f);
  for (std::size_t i = 0; i < 4; ++i) {
    float sa = scale(rng), sb = scale(rng);
    for (std::size_t d = 0; d < 16; ++d) {
      scaled_a.row(i)[d] *= sa;
      scaled_b.row(i)[d] *= sb;
    }
  }
  auto s1 = cosine_similarity_matrix(l2_normalize(raw_a), l2_normalize(raw_b));
  auto s2 = cosine_similarity_matrix(l2_normalize(scaled_a),
                                     l2_normalize(scaled_b));
  for (std::size_t i = 0; i < s1.values.size(); ++i) {
    CHECK(std::abs(s1.values[i] - s2.values[i]) < 1e-6f);
  }
  auto m1 = assign_pairs(s1, 0.0f);
  auto m2 = assign_pairs(s2, 0.0f);
  REQUIRE(m1.size() == m2.size());
  for (std::size_t i = 0; i < m1.size(); ++i) {
    CHECK(m1[i].row == m2[i].row);
    CHECK(m1[i].col == m2[i].col);
  }
}

TEST_CASE("drop_weak_pairs partitions by inclusive threshold") {
  std::vector<AlignedPair> pairs(2);
  pairs[0].similarity = 0.7;
  pairs[1].similarity = 0.1;
  auto [kept, dropped] = drop_weak_pairs(pairs, 0.5);
  CHECK(kept.size() == 1);
  CHECK(dropped.size() == 1);

  auto [all, none] = drop_weak_pairs(pairs, 0.0);
  CHECK(all.size() == 2);
  CHECK(none.empty());

  pairs[1].similarity = 0.5;
  auto [boundary, rest] = drop_weak_pairs(pairs, 0.5);
  CHECK(boundary.size() == 2);
  CHECK(rest.empty());
}
