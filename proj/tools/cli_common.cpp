#include "cli_common.hpp"

#include <cctype>
#include <chrono>
#include <ctime>

namespace pathkit::cli {

RunManifest::RunManifest(std::string subcommand, std::string path)
    : subcommand_(std::move(subcommand)), path_(std::move(path)) {}

void RunManifest::add_input(const std::string& path) {
  ojson entry;
  entry["path"] = path;
  entry["digest"] = file_digest(path);
  inputs_.push_back(entry);
}

void RunManifest::set_diagnostics(const std::string& path,
                                  const DiagnosticsSink& sink) {
  diagnostics_path_ = path;
  counts_["diagnostics"] = sink.count();
}

void RunManifest::write() const {
  ojson obj;
  obj["subcommand"] = subcommand_;
  auto now = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ",
                std::gmtime(&now));
  obj["timestamp"] = stamp;
  obj["config"] = config_;
  obj["inputs"] = inputs_;
  obj["outputs"] = outputs_;
  obj["counts"] = counts_;
  if (!diagnostics_path_.empty()) obj["diagnostics"] = diagnostics_path_;
  write_file_atomic(path_, obj.dump(2) + "\n");
}

std::string default_manifest_path(const std::string& primary_out,
                                  const std::string& subcommand) {
  if (!primary_out.empty()) return primary_out + ".run.json";
  return subcommand + ".run.json";
}

std::string sanitize_id(const std::string& id) {
  std::string out;
  out.reserve(id.size());
  for (unsigned char c : id) {
    out.push_back(std::isalnum(c) ? static_cast<char>(c) : '_');
  }
  return out;
}

}  // namespace pathkit::cli
