#include "pathkit/vecindex/ivf.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "pathkit/core/error.hpp"
#include "pathkit/kernels/kernels.hpp"
#include "../core/leio.hpp"

namespace pathkit::vecindex {

namespace {

constexpr char kMagic[4] = {'I', 'V', 'F', '1'};
constexpr std::uint32_t kVersion = 1;

// unit vectors: ||x - c||^2 = 2 - 2*cos
double unit_sq_distance(float cosine) {
  return 2.0 - 2.0 * static_cast<double>(cosine);
}

std::size_t nearest_centroid(const Centroids& c, const float* v) {
  std::size_t best = 0;
  float best_cos = kernels::dot(v, c.row(0), c.dim);
  for (std::size_t j = 1; j < c.k; ++j) {
    float cos = kernels::dot(v, c.row(j), c.dim);
    if (cos > best_cos) {
      best_cos = cos;
      best = j;
    }
  }
  return best;
}

}  // namespace

Centroids kmeans(const EmbeddingMatrix& x, std::size_t k,
                 std::size_t max_iters, std::uint64_t seed,
                 const std::function<void(std::size_t, double)>& on_iteration) {
  std::size_t n = x.n_rows;
  if (k < 1) throw Error("kmeans: k must be >= 1");
  if (n < k) {
    throw Error("kmeans: need at least k rows (" + std::to_string(n) +
                " < " + std::to_string(k) + ")");
  }
  if (!x.unit_norm) throw Error("kmeans: input must be unit-norm");

  Centroids c;
  c.k = k;
  c.dim = x.dim;
  c.values.resize(k * x.dim);

  // farthest-point init: seeded first pick, then repeatedly the point with
  // the largest distance to its nearest chosen centroid (ties: lowest index)
  std::mt19937_64 rng(seed);
  std::size_t first = static_cast<std::size_t>(rng() % n);
  std::memcpy(c.row(0), x.row(first), x.dim * sizeof(float));
  std::vector<double> min_dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    min_dist[i] = unit_sq_distance(kernels::dot(x.row(i), c.row(0), x.dim));
  }
  for (std::size_t j = 1; j < k; ++j) {
    std::size_t far = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (min_dist[i] > min_dist[far]) far = i;
    }
    if (min_dist[far] <= 0.0) {
      throw Error("kmeans: fewer than k distinct rows");
    }
    std::memcpy(c.row(j), x.row(far), x.dim * sizeof(float));
    for (std::size_t i = 0; i < n; ++i) {
      min_dist[i] = std::min(
          min_dist[i],
          unit_sq_distance(kernels::dot(x.row(i), c.row(j), x.dim)));
    }
  }

  std::vector<std::size_t> assignment(n, 0);
  std::vector<float> sums(k * x.dim);
  std::vector<std::size_t> sizes(k);
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = nearest_centroid(c, x.row(i));
      if (iter == 0 || best != assignment[i]) changed = true;
      assignment[i] = best;
    }
    if (iter > 0 && !changed) break;

    std::fill(sums.begin(), sums.end(), 0.0f);
    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      kernels::add(sums.data() + assignment[i] * x.dim, x.row(i), x.dim);
      sizes[assignment[i]]++;
    }
    std::vector<std::size_t> needs_reseed;
    for (std::size_t j = 0; j < k; ++j) {
      float norm2 = kernels::squared_norm(sums.data() + j * x.dim, x.dim);
      if (sizes[j] == 0 || norm2 == 0.0f) {
        needs_reseed.push_back(j);
        continue;
      }
      std::memcpy(c.row(j), sums.data() + j * x.dim, x.dim * sizeof(float));
      kernels::scale(c.row(j), x.dim, 1.0f / std::sqrt(norm2));
    }
    if (!needs_reseed.empty()) {
      // reseed with the points farthest from their own centroid
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), 0);
      std::vector<double> dist(n);
      for (std::size_t i = 0; i < n; ++i) {
        dist[i] = unit_sq_distance(
            kernels::dot(x.row(i), c.row(assignment[i]), x.dim));
      }
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return dist[a] != dist[b] ? dist[a] > dist[b] : a < b;
      });
      for (std::size_t r = 0; r < needs_reseed.size() && r < n; ++r) {
        std::memcpy(c.row(needs_reseed[r]), x.row(order[r]),
                    x.dim * sizeof(float));
      }
    }
    if (on_iteration) {
      double objective = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        objective += unit_sq_distance(
            kernels::dot(x.row(i), c.row(assignment[i]), x.dim));
      }
      on_iteration(iter, objective);
    }
  }
  return c;
}

IvfIndex build_ivf(const EmbeddingMatrix& x,
                   const std::vector<std::uint64_t>& ids,
                   Centroids centroids) {
  if (centroids.k == 0) throw Error("build_ivf: no centroids");
  if (ids.size() != x.n_rows) {
    throw Error("build_ivf: id count does not match row count");
  }
  if (!x.unit_norm) throw Error("build_ivf: input must be unit-norm");
  if (x.n_rows > 0 && x.dim != centroids.dim) {
    throw Error("build_ivf: dimension mismatch");
  }
  std::set<std::uint64_t> unique(ids.begin(), ids.end());
  if (unique.size() != ids.size()) {
    throw Error("build_ivf: duplicate vector ids");
  }
  IvfIndex index;
  index.centroids = std::move(centroids);
  index.lists.resize(index.centroids.k);
  index.total_count = x.n_rows;
  for (std::size_t i = 0; i < x.n_rows; ++i) {
    std::size_t list = nearest_centroid(index.centroids, x.row(i));
    index.lists[list].ids.push_back(ids[i]);
    index.lists[list].vectors.insert(index.lists[list].vectors.end(),
                                     x.row(i), x.row(i) + x.dim);
  }
  return index;
}

namespace {

void sort_hits(std::vector<SearchHit>& hits) {
  std::sort(hits.begin(), hits.end(), [](const SearchHit& a,
                                         const SearchHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
}

}  // namespace

std::vector<SearchHit> search(const IvfIndex& index, const float* query,
                              SearchParams params, SearchDebug* debug) {
  std::size_t k_centroids = index.centroids.k;
  if (k_centroids == 0) return {};
  std::size_t nprobe = std::clamp<std::size_t>(params.nprobe, 1, k_centroids);

  std::vector<std::pair<float, std::size_t>> centroid_rank(k_centroids);
  for (std::size_t j = 0; j < k_centroids; ++j) {
    centroid_rank[j] = {kernels::dot(query, index.centroids.row(j),
                                     index.dim()),
                        j};
  }
  std::sort(centroid_rank.begin(), centroid_rank.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first > b.first;
              return a.second < b.second;
            });

  std::vector<SearchHit> hits;
  for (std::size_t p = 0; p < nprobe; ++p) {
    std::size_t list_idx = centroid_rank[p].second;
    if (debug) debug->probed_lists.push_back(list_idx);
    const auto& list = index.lists[list_idx];
    for (std::size_t i = 0; i < list.ids.size(); ++i) {
      float score = kernels::dot(
          query, list.vectors.data() + i * index.dim(), index.dim());
      hits.push_back({list.ids[i], score});
    }
  }
  sort_hits(hits);
  if (hits.size() > params.k) hits.resize(params.k);
  return hits;
}

std::vector<SearchHit> exact_search(const EmbeddingMatrix& x,
                                    const std::vector<std::uint64_t>& ids,
                                    const float* query, std::size_t k) {
  if (ids.size() != x.n_rows) {
    throw Error("exact_search: id count does not match row count");
  }
  std::vector<SearchHit> hits;
  hits.reserve(x.n_rows);
  for (std::size_t i = 0; i < x.n_rows; ++i) {
    hits.push_back({ids[i], kernels::dot(query, x.row(i), x.dim)});
  }
  sort_hits(hits);
  if (hits.size() > k) hits.resize(k);
  return hits;
}

void save_index(const IvfIndex& index, std::ostream& sink) {
  leio::Writer w(sink);
  w.write_bytes(kMagic, 4);
  w.write_u32(kVersion);
  w.write_u32(static_cast<std::uint32_t>(index.centroids.dim));
  w.write_u32(static_cast<std::uint32_t>(index.centroids.k));
  w.write_u64(index.total_count);
  w.write_f32_array(index.centroids.values.data(),
                    index.centroids.values.size());
  for (const auto& list : index.lists) {
    w.write_u64(list.ids.size());
    w.write_u64_array(list.ids.data(), list.ids.size());
    w.write_f32_array(list.vectors.data(), list.vectors.size());
  }
}

void save_index(const IvfIndex& index, const std::string& path) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + tmp);
    save_index(index, out);
    out.flush();
    if (!out) throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

IvfIndex load_index(std::istream& source) {
  leio::Reader r(source);
  char magic[4];
  r.read_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad index magic (expected \"IVF1\")");
  }
  std::uint32_t version = r.read_u32("version");
  if (version != kVersion) {
    throw FormatError("unsupported index version " + std::to_string(version));
  }
  IvfIndex index;
  index.centroids.dim = r.read_u32("dim");
  index.centroids.k = r.read_u32("k");
  index.total_count = r.read_u64("count");
  if (index.centroids.dim == 0 || index.centroids.k == 0) {
    throw FormatError("index header declares zero dim or k");
  }
  index.centroids.values.resize(index.centroids.k * index.centroids.dim);
  r.read_f32_array(index.centroids.values.data(),
                   index.centroids.values.size(), "centroid block");
  index.lists.resize(index.centroids.k);
  std::uint64_t loaded = 0;
  for (auto& list : index.lists) {
    std::uint64_t len = r.read_u64("posting list length");
    list.ids.resize(len);
    r.read_u64_array(list.ids.data(), len, "posting list ids");
    list.vectors.resize(len * index.centroids.dim);
    r.read_f32_array(list.vectors.data(), list.vectors.size(),
                     "posting list vectors");
    loaded += len;
  }
  if (loaded != index.total_count) {
    throw FormatError("posting list sizes sum to " + std::to_string(loaded) +
                      ", header says " + std::to_string(index.total_count));
  }
  return index;
}

IvfIndex load_index(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open index: " + path);
  return load_index(in);
}

void validate_index(const IvfIndex& index) {
  std::set<std::uint64_t> seen;
  std::uint64_t count = 0;
  for (std::size_t j = 0; j < index.lists.size(); ++j) {
    const auto& list = index.lists[j];
    if (list.vectors.size() != list.ids.size() * index.dim()) {
      throw Error("list " + std::to_string(j) + " vector block size mismatch");
    }
    for (std::size_t i = 0; i < list.ids.size(); ++i) {
      if (!seen.insert(list.ids[i]).second) {
        throw Error("id " + std::to_string(list.ids[i]) +
                    " appears in more than one posting list");
      }
      std::size_t nearest = nearest_centroid(
          index.centroids, list.vectors.data() + i * index.dim());
      if (nearest != j) {
        throw Error("id " + std::to_string(list.ids[i]) +
                    " stored in list " + std::to_string(j) +
                    " but nearest centroid is " + std::to_string(nearest));
      }
      ++count;
    }
  }
  if (count != index.total_count) {
    throw Error("total_count does not match posting list contents");
  }
}

std::size_t default_centroid_count(std::size_t n_vectors) {
  if (n_vectors == 0) return 1;
  return static_cast<std::size_t>(
      std::ceil(std::sqrt(static_cast<double>(n_vectors))));
}

std::size_t default_nprobe(std::size_t k_centroids) {
  return std::max<std::size_t>(1, k_centroids / 8);
}

}  // namespace pathkit::vecindex
