#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pathkit/core/digest.hpp"
#include "pathkit/core/diagnostics.hpp"
#include "pathkit/core/error.hpp"
#include "pathkit/core/jsonl.hpp"

namespace pathkit::cli {

// Caller-fixable problems (bad flags, missing or malformed inputs) exit 1;
// everything else exits 2.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

// Runs the input-loading phase of a command; any toolkit error there is a
// validation failure, not a runtime one.
template <typename F>
auto validated(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw ValidationError(e.what());
  }
}

// Every subcommand writes one of these next to its primary output: the
// effective config, input digests and counts that make the artifact
// self-describing. Timestamps live only here, never in data outputs.
class RunManifest {
 public:
  RunManifest(std::string subcommand, std::string path);

  void set_config(ojson config) { config_ = std::move(config); }
  void add_input(const std::string& path);
  void add_output(const std::string& path) { outputs_.push_back(path); }
  void set_count(const std::string& name, std::uint64_t value) {
    counts_[name] = value;
  }
  void set_diagnostics(const std::string& path, const DiagnosticsSink& sink);

  void write() const;

 private:
  std::string subcommand_;
  std::string path_;
  ojson config_ = ojson::object();
  ojson inputs_ = ojson::array();
  std::vector<std::string> outputs_;
  ojson counts_ = ojson::object();
  std::string diagnostics_path_;
};

// "<primary_out>.run.json", or "<subcommand>.run.json" for commands without
// a natural file output.
std::string default_manifest_path(const std::string& primary_out,
                                  const std::string& subcommand);

std::string sanitize_id(const std::string& id);

}  // namespace pathkit::cli
