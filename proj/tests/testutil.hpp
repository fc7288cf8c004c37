#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pathkit/core/embedding.hpp"

namespace testutil {

// Unique per-process scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("pathkit-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

inline pathkit::EmbeddingMatrix random_embeddings(std::size_t n,
                                                  std::size_t dim,
                                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  pathkit::EmbeddingMatrix m;
  m.n_rows = n;
  m.dim = dim;
  m.values.resize(n * dim);
  for (auto& v : m.values) v = dist(rng);
  return m;
}

// Orthonormal unit basis rows e_{offset+i mod dim}.
inline pathkit::EmbeddingMatrix basis_embeddings(std::size_t n,
                                                 std::size_t dim,
                                                 std::size_t offset = 0) {
  pathkit::EmbeddingMatrix m;
  m.n_rows = n;
  m.dim = dim;
  m.values.assign(n * dim, 0.0f);
  for (std::size_t i = 0; i < n; ++i) {
    m.values[i * dim + (offset + i) % dim] = 1.0f;
  }
  m.unit_norm = true;
  return m;
}

}  // namespace testutil
