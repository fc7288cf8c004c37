#include "pathkit/core/jsonl.hpp"

#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>

namespace pathkit {

void for_each_jsonl(std::istream& in,
                    const std::function<void(std::size_t, const ojson&)>& fn) {
  std::string line;
  std::size_t offset = 0;
  while (std::getline(in, line)) {
    std::size_t line_start = offset;
    offset += line.size() + 1;  // getline consumed the '\n'
    if (line.empty() ||
        line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    ojson parsed = ojson::parse(line, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded()) {
      throw FramingError("malformed JSONL line", line_start);
    }
    fn(line_start, parsed);
  }
}

void for_each_jsonl_file(
    const std::string& path,
    const std::function<void(std::size_t, const ojson&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  for_each_jsonl(in, fn);
}

std::vector<ojson> read_jsonl_file(const std::string& path) {
  std::vector<ojson> out;
  for_each_jsonl_file(path,
                      [&](std::size_t, const ojson& obj) { out.push_back(obj); });
  return out;
}

struct AtomicFileWriter::Impl {
  std::ofstream out;
};

AtomicFileWriter::AtomicFileWriter(std::string path)
    : path_(std::move(path)), tmp_path_(path_ + ".tmp"), impl_(new Impl) {
  impl_->out.open(tmp_path_, std::ios::binary | std::ios::trunc);
  if (!impl_->out) throw Error("cannot open for writing: " + tmp_path_);
}

AtomicFileWriter::~AtomicFileWriter() {
  if (!committed_) {
    impl_->out.close();
    std::error_code ec;
    std::filesystem::remove(tmp_path_, ec);
  }
}

std::ostream& AtomicFileWriter::stream() { return impl_->out; }

void AtomicFileWriter::write_line(const ojson& obj) {
  impl_->out << obj.dump() << '\n';
}

void AtomicFileWriter::commit() {
  impl_->out.flush();
  if (!impl_->out) throw Error("write failed: " + tmp_path_);
  impl_->out.close();
  std::filesystem::rename(tmp_path_, path_);
  committed_ = true;
}

void write_jsonl_atomic(const std::string& path,
                        const std::vector<ojson>& lines) {
  AtomicFileWriter writer(path);
  for (const auto& line : lines) writer.write_line(line);
  writer.commit();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::string& path, std::string_view content) {
  AtomicFileWriter writer(path);
  writer.stream().write(content.data(),
                        static_cast<std::streamsize>(content.size()));
  writer.commit();
}

}  // namespace pathkit
