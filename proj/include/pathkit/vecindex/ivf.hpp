#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pathkit/core/embedding.hpp"

namespace pathkit::vecindex {

struct Centroids {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::vector<float> values;  // k x dim, unit-norm rows

  const float* row(std::size_t i) const { return values.data() + i * dim; }
  float* row(std::size_t i) { return values.data() + i * dim; }
};

// Spherical k-means: Lloyd iterations from a seeded farthest-point
// initialization; assignment by maximum cosine (ties to the lower centroid
// index), centroid update = normalized mean; empty clusters reseeded with
// the point farthest from its centroid. Stops when assignments no longer
// change or after max_iters. Deterministic for fixed (x, k, seed).
// `on_iteration(iter, objective)` observes the within-cluster squared
// distance after each update, for convergence checks.
Centroids kmeans(
    const EmbeddingMatrix& x, std::size_t k, std::size_t max_iters,
    std::uint64_t seed,
    const std::function<void(std::size_t, double)>& on_iteration = {});

// Inverted-file index over unit vectors, cosine metric. Vectors are stored
// flat inside the posting list of their maximum-cosine centroid.
struct IvfIndex {
  Centroids centroids;
  struct PostingList {
    std::vector<std::uint64_t> ids;
    std::vector<float> vectors;  // ids.size() x dim
  };
  std::vector<PostingList> lists;
  std::uint64_t total_count = 0;

  std::size_t dim() const { return centroids.dim; }
};

IvfIndex build_ivf(const EmbeddingMatrix& x,
                   const std::vector<std::uint64_t>& ids,
                   Centroids centroids);

struct SearchParams {
  std::size_t k = 10;
  std::size_t nprobe = 1;  // clamped to [1, centroids.k]
};

struct SearchHit {
  std::uint64_t id = 0;
  float score = 0.0f;
};

// Optional white-box probe report for tests.
struct SearchDebug {
  std::vector<std::size_t> probed_lists;
};

// Probes the nprobe highest-cosine centroids, scores exactly within the
// probed lists, returns top-k by (score desc, id asc). With
// nprobe = centroids.k the result equals exact_search bit for bit.
std::vector<SearchHit> search(const IvfIndex& index, const float* query,
                              SearchParams params,
                              SearchDebug* debug = nullptr);

// Full-scan oracle with the same tie rule.
std::vector<SearchHit> exact_search(const EmbeddingMatrix& x,
                                    const std::vector<std::uint64_t>& ids,
                                    const float* query, std::size_t k);

// Versioned little-endian format: header {magic "IVF1", version u32,
// dim u32, k u32, count u64}, centroid block, then per-list
// {len u64, ids u64[], vectors f32[]}. load(save(index)) is byte-identical.
void save_index(const IvfIndex& index, std::ostream& sink);
void save_index(const IvfIndex& index, const std::string& path);
IvfIndex load_index(std::istream& source);
IvfIndex load_index(const std::string& path);

// Re-checks the structural invariants (ids unique across lists, every
// vector in its nearest-centroid list, counts consistent). Run after load.
void validate_index(const IvfIndex& index);

// Default desk-scale parameters.
std::size_t default_centroid_count(std::size_t n_vectors);
std::size_t default_nprobe(std::size_t k_centroids);

}  // namespace pathkit::vecindex
