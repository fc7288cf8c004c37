#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pathkit/core/client.hpp"
#include "pathkit/core/jsonl.hpp"
#include "pathkit/service/registry.hpp"
#include "pathkit/vecindex/ivf.hpp"

namespace pathkit::service {

// A parsed <action>{"tool": ..., "arguments": {...}}</action> block.
struct ActionCommand {
  std::string tool_name;
  ojson arguments = ojson::object();
  std::size_t span_begin = 0;  // byte range of the block in the source text
  std::size_t span_end = 0;
};

// First well-formed action block in the text, nullopt when there is none.
// A block that opens but is unclosed or carries invalid JSON is a parse
// error (ActionParseError with byte offset), distinct from "no block".
std::optional<ActionCommand> parse_action(const std::string& assistant_text);

struct ToolResult {
  std::string tool;
  enum class Status { ok, error } status = Status::error;
  ojson payload = ojson::object();
  std::string diagnostic;
  double latency_ms = 0.0;
};

// Thrown for caller faults (unknown tool, bad arguments); upstream faults
// come back as error-status ToolResults instead.
class UnknownToolError : public Error {
 public:
  explicit UnknownToolError(const std::string& what) : Error(what) {}
};

struct DispatchOptions {
  int timeout_ms = 10000;
  int max_retries = 2;  // transport errors only, never schema errors
};

// POSTs {arguments, image_ref?} to the tool endpoint and validates the
// response against the tool kind's payload schema:
//   classify: {label, confidence in [0,1]}
//   detect:   {detections:[{class, count >= 0, points?}]}
//   generate: {image_ref} / segment: {mask_ref}
ToolResult dispatch(const ActionCommand& cmd, const ToolRegistry& registry,
                    const std::optional<std::string>& image_ref,
                    const DispatchOptions& options = {});

// Checks a payload against the kind schema. Empty string when valid.
std::string validate_payload(ToolKind kind, const ojson& payload);

// Renders a ToolResult for the user: detect results as a markdown table
// (Class | Count | Percentage, percentages apportioned to one decimal so the
// column sums to exactly 100.0, plus a totals line), classify results as a
// sentence, generate/segment as an artifact reference line. Error results
// produce an apology embedding the diagnostic.
std::string compose_result(const ActionCommand& cmd, const ToolResult& result);

struct AbstractMeta {
  std::string title;
  std::string abstract_text;
};

struct ContextBlock {
  std::uint64_t id = 0;
  float score = 0.0f;
  std::string title;
  std::string excerpt;
};

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks an ephemeral port
  std::string index_path;
  std::string metadata_path;
  std::string registry_path;
  std::string embedder_endpoint;  // optional; enables text queries
  std::string fixture_dir;        // replay fixtures for the embedder
  int timeout_ms = 10000;
  int max_retries = 2;
};

// HTTP front-end over the loaded index + registry:
//   POST /v1/retrieve {embedding|text, k, nprobe} -> {results:[...]}
//   POST /v1/act {assistant_text, image_ref?} -> {command, result,
//        composed_text} | {} | {error}
//   GET  /v1/ready -> {status, vectors, tools, index_digest}
class Service {
 public:
  // Loads index, metadata and registry; throws on any startup problem.
  explicit Service(const ServeConfig& config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Serves on the calling thread until stop() (or a signal handler) fires.
  int run();
  void stop();

  // Request handlers, exposed for in-process tests. Each returns the
  // response body and fills http_status.
  ojson handle_ready() const;
  ojson handle_retrieve(const ojson& body, int& http_status) const;
  ojson handle_act(const ojson& body, int& http_status) const;

  std::vector<ContextBlock> retrieve_context(const std::vector<float>& query,
                                             std::size_t k,
                                             std::size_t nprobe) const;

  const vecindex::IvfIndex& index() const { return index_; }
  const ToolRegistry& registry() const { return registry_; }

 private:
  ServeConfig config_;
  vecindex::IvfIndex index_;
  std::map<std::uint64_t, AbstractMeta> metadata_;
  ToolRegistry registry_;
  std::string index_digest_;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pathkit::service
