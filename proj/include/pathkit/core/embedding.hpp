#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace pathkit {

// N x D dense float32 vectors, row-major. unit_norm records that every row
// has been L2-normalized (within 1e-4); cosine between unit rows is a plain
// dot product.
struct EmbeddingMatrix {
  std::size_t n_rows = 0;
  std::size_t dim = 0;
  std::vector<float> values;
  bool unit_norm = false;

  const float* row(std::size_t i) const { return values.data() + i * dim; }
  float* row(std::size_t i) { return values.data() + i * dim; }
};

// True when every row's L2 norm is within `tol` of 1.
bool rows_unit_norm(const EmbeddingMatrix& m, float tol = 1e-4f);

// Embedding sidecar format, shared by the alignment and index tooling:
// little-endian header {magic "EMB1", dim u32, count u64} followed by
// count*dim float32 values, plus a companion text file with one id per row.
void save_embeddings(const std::string& path, const EmbeddingMatrix& m);
EmbeddingMatrix load_embeddings(const std::string& path);

void save_ids(const std::string& path, const std::vector<std::string>& ids);
std::vector<std::string> load_ids(const std::string& path);

}  // namespace pathkit
