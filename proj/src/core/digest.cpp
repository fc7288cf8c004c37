#include "pathkit/core/digest.hpp"

#include <array>
#include <cstdio>
#include <fstream>

#include "pathkit/core/error.hpp"

namespace pathkit {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(v));
  return buf;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file for digest: " + path);
  std::uint64_t state = 0xcbf29ce484222325ULL;
  std::array<char, 1 << 16> chunk;
  while (in) {
    in.read(chunk.data(), chunk.size());
    std::streamsize got = in.gcount();
    if (got > 0) {
      state = fnv1a64(std::string_view(chunk.data(),
                                       static_cast<std::size_t>(got)),
                      state);
    }
  }
  return "fnv1a64:" + hex64(state);
}

}  // namespace pathkit
