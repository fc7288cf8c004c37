#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace pathkit {

// One skipped/degraded record. Batch runs never abort on these; they are
// written as a machine-readable JSONL sidecar next to the run output.
struct Diagnostic {
  std::string stage;
  std::string id;
  std::string message;
};

class DiagnosticsSink {
 public:
  void add(std::string stage, std::string id, std::string message) {
    items_.push_back({std::move(stage), std::move(id), std::move(message)});
  }
  const std::vector<Diagnostic>& items() const { return items_; }
  std::size_t count() const { return items_.size(); }

  // JSONL, one {stage, id, message} object per line.
  void write_file(const std::string& path) const;

 private:
  std::vector<Diagnostic> items_;
};

}  // namespace pathkit
