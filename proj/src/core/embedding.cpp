#include "pathkit/core/embedding.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "pathkit/core/error.hpp"
#include "pathkit/kernels/kernels.hpp"
#include "leio.hpp"

namespace pathkit {

namespace {
constexpr char kMagic[4] = {'E', 'M', 'B', '1'};
}

bool rows_unit_norm(const EmbeddingMatrix& m, float tol) {
  for (std::size_t i = 0; i < m.n_rows; ++i) {
    float norm = std::sqrt(kernels::squared_norm(m.row(i), m.dim));
    if (std::abs(norm - 1.0f) > tol) return false;
  }
  return true;
}

void save_embeddings(const std::string& path, const EmbeddingMatrix& m) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + tmp);
    leio::Writer w(out);
    w.write_bytes(kMagic, 4);
    w.write_u32(static_cast<std::uint32_t>(m.dim));
    w.write_u64(static_cast<std::uint64_t>(m.n_rows));
    w.write_f32_array(m.values.data(), m.values.size());
    out.flush();
    if (!out) throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

EmbeddingMatrix load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  leio::Reader r(in);
  char magic[4];
  r.read_bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("bad magic in embedding file " + path +
                      " (expected \"EMB1\")");
  }
  EmbeddingMatrix m;
  m.dim = r.read_u32("dim");
  m.n_rows = r.read_u64("count");
  if (m.dim == 0) throw FormatError("embedding file declares dim 0: " + path);
  m.values.resize(m.n_rows * m.dim);
  r.read_f32_array(m.values.data(), m.values.size(), "vector data");
  return m;
}

void save_ids(const std::string& path, const std::vector<std::string>& ids) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + tmp);
    for (const auto& id : ids) out << id << '\n';
    out.flush();
    if (!out) throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::string> load_ids(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::vector<std::string> ids;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) ids.push_back(line);
  }
  return ids;
}

}  // namespace pathkit
