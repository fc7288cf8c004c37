#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "pathkit/core/error.hpp"

namespace pathkit {

using json = nlohmann::json;
// Insertion-ordered JSON: keeps serialized field order stable across runs.
using ojson = nlohmann::ordered_json;

// Calls fn(line_start_offset, parsed) for every non-blank line. A line that
// is not valid JSON is a framing error (the stream cannot be trusted) and
// aborts with the line's byte offset.
void for_each_jsonl(std::istream& in,
                    const std::function<void(std::size_t, const ojson&)>& fn);
void for_each_jsonl_file(
    const std::string& path,
    const std::function<void(std::size_t, const ojson&)>& fn);

std::vector<ojson> read_jsonl_file(const std::string& path);

// Writes to "<path>.tmp" and renames into place on commit, so a crashed run
// never leaves a partial file at the destination.
class AtomicFileWriter {
 public:
  explicit AtomicFileWriter(std::string path);
  ~AtomicFileWriter();

  AtomicFileWriter(const AtomicFileWriter&) = delete;
  AtomicFileWriter& operator=(const AtomicFileWriter&) = delete;

  std::ostream& stream();
  void write_line(const ojson& obj);
  void commit();

 private:
  std::string path_;
  std::string tmp_path_;
  bool committed_ = false;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

void write_jsonl_atomic(const std::string& path,
                        const std::vector<ojson>& lines);

// Reads a whole file into a string. Throws Error when unreadable.
std::string read_file(const std::string& path);
void write_file_atomic(const std::string& path, std::string_view content);

}  // namespace pathkit
