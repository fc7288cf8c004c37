#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "pathkit/align/align.hpp"
#include "pathkit/core/error.hpp"
#include "pathkit/vecindex/ivf.hpp"
#include "testutil.hpp"

using namespace pathkit;
using namespace pathkit::vecindex;

namespace {

EmbeddingMatrix unit_random(std::size_t n, std::size_t dim,
                            std::uint64_t seed) {
  return align::l2_normalize(testutil::random_embeddings(n, dim, seed));
}

std::vector<std::uint64_t> iota_ids(std::size_t n, std::uint64_t start = 0) {
  std::vector<std::uint64_t> ids(n);
  std::iota(ids.begin(), ids.end(), start);
  return ids;
}

IvfIndex small_index(std::size_t n, std::size_t dim, std::uint64_t seed,
                     std::size_t k) {
  auto x = unit_random(n, dim, seed);
  auto centroids = kmeans(x, k, 20, seed);
  return build_ivf(x, iota_ids(n), std::move(centroids));
}

}  // namespace

TEST_CASE("two tight pairs split into their normalized means") {
  EmbeddingMatrix x;
  x.n_rows = 4;
  x.dim = 2;
  float c = std::cos(0.05f), s = std::sin(0.05f);
  x.values = {c, s, c, -s, -c, s, -c, -s};  // two pairs around +x and -x
  x.unit_norm = true;
  auto centroids = kmeans(x, 2, 10, 1);
  REQUIRE(centroids.k == 2);
  // each centroid is the normalized mean of one pair: (+-1, 0)
  std::set<int> signs;
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(std::abs(std::abs(centroids.row(j)[0]) - 1.0f) < 1e-5f);
    CHECK(std::abs(centroids.row(j)[1]) < 1e-5f);
    signs.insert(centroids.row(j)[0] > 0 ? 1 : -1);
  }
  CHECK(signs.size() == 2);

  auto index = build_ivf(x, iota_ids(4), std::move(centroids));
  for (const auto& list : index.lists) CHECK(list.ids.size() == 2);
}

TEST_CASE("k equal to the row count gives every point its own centroid") {
  auto x = unit_random(6, 8, 3);
  auto centroids = kmeans(x, 6, 10, 3);
  std::set<std::size_t> matched;
  for (std::size_t j = 0; j < 6; ++j) {
    for (std::size_t i = 0; i < 6; ++i) {
      bool equal = true;
      for (std::size_t d = 0; d < 8; ++d) {
        if (centroids.row(j)[d] != x.row(i)[d]) {
          equal = false;
          break;
        }
      }
      if (equal) matched.insert(i);
    }
  }
  CHECK(matched.size() == 6);
}

TEST_CASE("k=1 centroid is the normalized mean of all rows") {
  auto x = unit_random(10, 5, 9);
  auto centroids = kmeans(x, 1, 10, 9);
  std::vector<double> mean(5, 0.0);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t d = 0; d < 5; ++d) mean[d] += x.row(i)[d];
  }
  double norm = 0.0;
  for (double v : mean) norm += v * v;
  norm = std::sqrt(norm);
  for (std::size_t d = 0; d < 5; ++d) {
    CHECK(centroids.row(0)[d] ==
          doctest::Approx(mean[d] / norm).epsilon(1e-5));
  }
}

TEST_CASE("kmeans validates its inputs") {
  auto x = unit_random(3, 4, 1);
  CHECK_THROWS_AS(kmeans(x, 4, 10, 1), Error);
  CHECK_THROWS_AS(kmeans(x, 0, 10, 1), Error);
  auto raw = testutil::random_embeddings(3, 4, 1);
  CHECK_THROWS_AS(kmeans(raw, 2, 10, 1), Error);
}

TEST_CASE("the within-cluster objective never increases across iterations") {
  auto x = unit_random(200, 16, 17);
  double prev = std::numeric_limits<double>::infinity();
  kmeans(x, 12, 30, 17, [&](std::size_t, double objective) {
    CHECK(objective <= prev + 1e-9);
    prev = objective;
  });
  CHECK(std::isfinite(prev));
}

TEST_CASE("kmeans is deterministic for a fixed seed") {
  auto x = unit_random(100, 8, 5);
  auto a = kmeans(x, 7, 15, 42);
  auto b = kmeans(x, 7, 15, 42);
  CHECK(a.values == b.values);
}

TEST_CASE("build_ivf routes each vector to its maximum-cosine centroid") {
  EmbeddingMatrix x;
  x.n_rows = 2;
  x.dim = 2;
  x.values = {1, 0, 0, 1};
  x.unit_norm = true;
  Centroids c;
  c.k = 2;
  c.dim = 2;
  c.values = {1, 0, 0, 1};
  auto index = build_ivf(x, {10, 20}, c);
  REQUIRE(index.lists.size() == 2);
  CHECK(index.lists[0].ids == std::vector<std::uint64_t>{10});
  CHECK(index.lists[1].ids == std::vector<std::uint64_t>{20});
}

TEST_CASE("equidistant vectors land in the lower-index list") {
  EmbeddingMatrix x;
  x.n_rows = 1;
  x.dim = 2;
  float r = 1.0f / std::sqrt(2.0f);
  x.values = {r, r};
  x.unit_norm = true;
  Centroids c;
  c.k = 2;
  c.dim = 2;
  c.values = {1, 0, 0, 1};  // equal cosine r to both
  auto index = build_ivf(x, {7}, c);
  CHECK(index.lists[0].ids.size() == 1);
  CHECK(index.lists[1].ids.empty());
}

TEST_CASE("build_ivf rejects duplicates and empty centroid sets") {
  auto x = unit_random(3, 4, 2);
  Centroids none;
  CHECK_THROWS_AS(build_ivf(x, iota_ids(3), none), Error);
  auto c = kmeans(x, 2, 5, 2);
  CHECK_THROWS_AS(build_ivf(x, {1, 1, 2}, c), Error);
}

TEST_CASE("searching an indexed vector with full probes returns it first") {
  auto x = unit_random(64, 16, 21);
  auto index = build_ivf(x, iota_ids(64), kmeans(x, 8, 20, 21));
  auto hits = search(index, x.row(17), {5, index.centroids.k});
  REQUIRE(!hits.empty());
  CHECK(hits[0].id == 17);
  CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("full-probe search equals exact_search bit for bit") {
  auto x = unit_random(64, 12, 33);
  auto ids = iota_ids(64, 100);
  auto index = build_ivf(x, ids, kmeans(x, 8, 20, 33));
  auto queries = unit_random(20, 12, 34);
  for (std::size_t q = 0; q < queries.n_rows; ++q) {
    auto approx = search(index, queries.row(q), {10, index.centroids.k});
    auto exact = exact_search(x, ids, queries.row(q), 10);
    REQUIRE(approx.size() == exact.size());
    for (std::size_t i = 0; i < exact.size(); ++i) {
      CHECK(approx[i].id == exact[i].id);
      CHECK(approx[i].score == exact[i].score);  // bitwise
    }
  }
}

TEST_CASE("k larger than the corpus returns every candidate, ranked") {
  auto x = unit_random(10, 8, 44);
  auto index = build_ivf(x, iota_ids(10), kmeans(x, 3, 10, 44));
  auto hits = search(index, x.row(0), {50, index.centroids.k});
  CHECK(hits.size() == 10);
  for (std::size_t i = 1; i < hits.size(); ++i) {
    CHECK(hits[i - 1].score >= hits[i].score);
  }
}

TEST_CASE("search never returns a vector from an unprobed list") {
  auto x = unit_random(128, 8, 55);
  auto index = build_ivf(x, iota_ids(128), kmeans(x, 16, 20, 55));
  std::map<std::uint64_t, std::size_t> id_to_list;
  for (std::size_t j = 0; j < index.lists.size(); ++j) {
    for (auto id : index.lists[j].ids) id_to_list[id] = j;
  }
  auto q = unit_random(1, 8, 56);
  SearchDebug debug;
  auto hits = search(index, q.row(0), {20, 2}, &debug);
  CHECK(debug.probed_lists.size() == 2);
  std::set<std::size_t> probed(debug.probed_lists.begin(),
                               debug.probed_lists.end());
  for (const auto& hit : hits) {
    CHECK(probed.count(id_to_list[hit.id]) == 1);
  }
}

TEST_CASE("exact_search handles the degenerate corpora") {
  EmbeddingMatrix one;
  one.n_rows = 1;
  one.dim = 2;
  one.values = {1, 0};
  one.unit_norm = true;
  auto hits = exact_search(one, {42}, one.row(0), 5);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].id == 42);

  // orthogonal corpus: all scores 0, ids ascending by the tie rule
  auto basis = testutil::basis_embeddings(4, 8, 0);
  std::vector<float> q(8, 0.0f);
  q[7] = 1.0f;
  auto tied = exact_search(basis, {9, 3, 7, 1}, q.data(), 4);
  REQUIRE(tied.size() == 4);
  CHECK(tied[0].id == 1);
  CHECK(tied[1].id == 3);
  CHECK(tied[2].id == 7);
  CHECK(tied[3].id == 9);
  for (const auto& h : tied) CHECK(h.score == 0.0f);
}

TEST_CASE("exact_search agrees with an independent scalar double loop") {
  auto x = unit_random(60, 24, 61);
  auto ids = iota_ids(60);
  auto q = unit_random(1, 24, 62);
  auto hits = exact_search(x, ids, q.row(0), 10);

  std::vector<std::pair<double, std::uint64_t>> oracle;
  for (std::size_t i = 0; i < x.n_rows; ++i) {
    double score = 0.0;
    for (std::size_t d = 0; d < x.dim; ++d) {
      score += static_cast<double>(q.row(0)[d]) * x.row(i)[d];
    }
    oracle.push_back({score, ids[i]});
  }
  std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  // sanity: this corpus has no near-ties that could flip between float and
  // double scoring
  for (std::size_t i = 1; i < 11; ++i) {
    REQUIRE(oracle[i - 1].first - oracle[i].first > 1e-4);
  }
  for (std::size_t i = 0; i < hits.size(); ++i) {
    CHECK(hits[i].id == oracle[i].second);
    CHECK(static_cast<double>(hits[i].score) ==
          doctest::Approx(oracle[i].first).epsilon(1e-5));
  }
}

TEST_CASE("recall against exact search grows with nprobe") {
  auto x = unit_random(512, 16, 71);
  auto ids = iota_ids(512);
  auto index = build_ivf(x, ids, kmeans(x, 23, 20, 71));
  auto queries = unit_random(40, 16, 72);
  double prev = 0.0;
  for (std::size_t nprobe : {1u, 4u, 23u}) {
    double overlap = 0.0;
    for (std::size_t q = 0; q < queries.n_rows; ++q) {
      auto approx = search(index, queries.row(q), {10, nprobe});
      auto exact = exact_search(x, ids, queries.row(q), 10);
      std::set<std::uint64_t> exact_ids;
      for (const auto& h : exact) exact_ids.insert(h.id);
      for (const auto& h : approx) overlap += exact_ids.count(h.id);
    }
    overlap /= 10.0 * queries.n_rows;
    CHECK(overlap >= prev - 1e-12);
    prev = overlap;
  }
  CHECK(prev == doctest::Approx(1.0));
}

TEST_CASE("save/load round trip is byte-identical") {
  auto index = small_index(50, 8, 81, 7);
  std::ostringstream first, second;
  save_index(index, first);
  std::istringstream in(first.str());
  auto loaded = load_index(in);
  save_index(loaded, second);
  CHECK(first.str() == second.str());
  validate_index(loaded);
  CHECK(loaded.total_count == index.total_count);
}

TEST_CASE("corrupted magic is a format error") {
  auto index = small_index(10, 4, 82, 3);
  std::ostringstream out;
  save_index(index, out);
  std::string bytes = out.str();
  bytes[0] = 'X';
  std::istringstream in(bytes);
  CHECK_THROWS_AS(load_index(in), FormatError);
}

TEST_CASE("unsupported version is a format error") {
  auto index = small_index(10, 4, 83, 3);
  std::ostringstream out;
  save_index(index, out);
  std::string bytes = out.str();
  bytes[4] = 99;  // version field
  std::istringstream in(bytes);
  CHECK_THROWS_AS(load_index(in), FormatError);
}

TEST_CASE("truncation errors name the offset where bytes ran out") {
  auto index = small_index(12, 4, 84, 3);
  std::ostringstream out;
  save_index(index, out);
  std::string bytes = out.str();
  std::string cut = bytes.substr(0, bytes.size() - 5);
  std::istringstream in(cut);
  try {
    load_index(in);
    FAIL("expected TruncationError");
  } catch (const TruncationError& e) {
    CHECK(e.byte_offset() <= cut.size());
    CHECK(e.byte_offset() > 0);
  }
}

TEST_CASE("validate_index catches misplaced vectors") {
  auto index = small_index(30, 6, 85, 4);
  validate_index(index);
  // move one vector into the wrong posting list
  std::size_t from = 0;
  while (index.lists[from].ids.empty()) ++from;
  std::size_t to = (from + 1) % index.lists.size();
  auto dim = index.dim();
  index.lists[to].ids.push_back(index.lists[from].ids.back());
  index.lists[to].vectors.insert(
      index.lists[to].vectors.end(),
      index.lists[from].vectors.end() - dim,
      index.lists[from].vectors.end());
  index.lists[from].ids.pop_back();
  index.lists[from].vectors.resize(index.lists[from].vectors.size() - dim);
  CHECK_THROWS_AS(validate_index(index), Error);
}

TEST_CASE("default parameters follow the desk-scale profile") {
  CHECK(default_centroid_count(0) == 1);
  CHECK(default_centroid_count(100) == 10);
  CHECK(default_centroid_count(101) == 11);
  CHECK(default_nprobe(23) == 2);
  CHECK(default_nprobe(4) == 1);
}
