#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "pathkit/core/error.hpp"

// Little-endian binary I/O for the versioned on-disk formats. Reads track
// the stream offset so truncation errors can name where the bytes ran out.
namespace pathkit::leio {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms unsupported");

template <typename T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    T out;
    auto* src = reinterpret_cast<const unsigned char*>(&v);
    auto* dst = reinterpret_cast<unsigned char*>(&out);
    for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = src[sizeof(T) - 1 - i];
    return out;
  }
  return v;
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::size_t offset() const { return offset_; }

  void read_bytes(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw TruncationError(std::string("truncated while reading ") + what,
                            offset_);
    }
    offset_ += n;
  }

  std::uint32_t read_u32(const char* what) {
    std::uint32_t v;
    read_bytes(&v, sizeof(v), what);
    return byteswap_if_big(v);
  }

  std::uint64_t read_u64(const char* what) {
    std::uint64_t v;
    read_bytes(&v, sizeof(v), what);
    return byteswap_if_big(v);
  }

  void read_f32_array(float* dst, std::size_t count, const char* what) {
    read_bytes(dst, count * sizeof(float), what);
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, dst + i, 4);
        bits = byteswap_if_big(bits);
        std::memcpy(dst + i, &bits, 4);
      }
    }
  }

  void read_u64_array(std::uint64_t* dst, std::size_t count,
                      const char* what) {
    read_bytes(dst, count * sizeof(std::uint64_t), what);
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < count; ++i) dst[i] = byteswap_if_big(dst[i]);
    }
  }

 private:
  std::istream& in_;
  std::size_t offset_ = 0;
};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void write_bytes(const void* src, std::size_t n) {
    out_.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
  }

  void write_u32(std::uint32_t v) {
    v = byteswap_if_big(v);
    write_bytes(&v, sizeof(v));
  }

  void write_u64(std::uint64_t v) {
    v = byteswap_if_big(v);
    write_bytes(&v, sizeof(v));
  }

  void write_f32_array(const float* src, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
      write_bytes(src, count * sizeof(float));
    } else {
      for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, src + i, 4);
        write_u32(bits);
      }
    }
  }

  void write_u64_array(const std::uint64_t* src, std::size_t count) {
    if constexpr (std::endian::native == std::endian::little) {
      write_bytes(src, count * sizeof(std::uint64_t));
    } else {
      for (std::size_t i = 0; i < count; ++i) write_u64(src[i]);
    }
  }

 private:
  std::ostream& out_;
};

}  // namespace pathkit::leio
