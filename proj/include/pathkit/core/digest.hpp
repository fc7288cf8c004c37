#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pathkit {

// FNV-1a 64-bit. Used for run-manifest fingerprints and fixture keys; not a
// cryptographic hash.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t state = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::string hex64(std::uint64_t v);

// Digest of a file's bytes, formatted as "fnv1a64:<16 hex digits>".
// Throws Error when the file cannot be read.
std::string file_digest(const std::string& path);

}  // namespace pathkit
