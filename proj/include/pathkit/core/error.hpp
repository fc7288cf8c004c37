#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pathkit {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Unparseable input framing: the byte stream itself cannot be trusted past
// this point (e.g. a line that is not valid JSON). Carries the offset of the
// offending line/field start.
class FramingError : public Error {
 public:
  FramingError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// Binary input ended before the payload its header declared.
class TruncationError : public Error {
 public:
  TruncationError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// Bad magic or unsupported version in a binary header.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what) {}
};

// An external client (text transform, embedder, tool endpoint) failed after
// the configured retries.
class ClientError : public Error {
 public:
  explicit ClientError(const std::string& what) : Error(what) {}
};

// A malformed <action> block in assistant text. Distinct from "no block".
class ActionParseError : public Error {
 public:
  ActionParseError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

}  // namespace pathkit
