#include "pathkit/service/service.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <random>
#include <thread>

#include "httplib.h"

#include "pathkit/core/digest.hpp"
#include "pathkit/core/error.hpp"
#include "../core/http_util.hpp"

namespace pathkit::service {

std::optional<ActionCommand> parse_action(const std::string& assistant_text) {
  const std::string open = "<action>";
  const std::string close = "</action>";
  std::size_t begin = assistant_text.find(open);
  if (begin == std::string::npos) return std::nullopt;
  std::size_t body_start = begin + open.size();
  std::size_t body_end = assistant_text.find(close, body_start);
  if (body_end == std::string::npos) {
    throw ActionParseError("unclosed <action> block", begin);
  }
  std::string body = assistant_text.substr(body_start, body_end - body_start);
  ojson parsed = ojson::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    throw ActionParseError("action block is not a JSON object", body_start);
  }
  if (!parsed.contains("tool") || !parsed["tool"].is_string() ||
      parsed["tool"].get<std::string>().empty()) {
    throw ActionParseError("action block missing non-empty \"tool\"",
                           body_start);
  }
  ActionCommand cmd;
  cmd.tool_name = parsed["tool"].get<std::string>();
  if (parsed.contains("arguments")) {
    if (!parsed["arguments"].is_object()) {
      throw ActionParseError("action \"arguments\" must be an object",
                             body_start);
    }
    cmd.arguments = parsed["arguments"];
  }
  cmd.span_begin = begin;
  cmd.span_end = body_end + close.size();
  return cmd;
}

std::string validate_payload(ToolKind kind, const ojson& payload) {
  switch (kind) {
    case ToolKind::classify: {
      if (!payload.contains("label") || !payload["label"].is_string()) {
        return "classify payload needs a string \"label\"";
      }
      if (!payload.contains("confidence") ||
          !payload["confidence"].is_number()) {
        return "classify payload needs a numeric \"confidence\"";
      }
      double c = payload["confidence"].get<double>();
      if (c < 0.0 || c > 1.0) return "confidence outside [0,1]";
      return "";
    }
    case ToolKind::detect: {
      if (!payload.contains("detections") ||
          !payload["detections"].is_array()) {
        return "detect payload needs a \"detections\" array";
      }
      for (const auto& d : payload["detections"]) {
        if (!d.is_object() || !d.contains("class") ||
            !d["class"].is_string()) {
          return "each detection needs a string \"class\"";
        }
        if (!d.contains("count") || !d["count"].is_number_integer() ||
            d["count"].get<std::int64_t>() < 0) {
          return "each detection needs a non-negative integer \"count\"";
        }
      }
      return "";
    }
    case ToolKind::generate:
      return payload.contains("image_ref") && payload["image_ref"].is_string()
                 ? ""
                 : "generate payload needs a string \"image_ref\"";
    case ToolKind::segment:
      return payload.contains("mask_ref") && payload["mask_ref"].is_string()
                 ? ""
                 : "segment payload needs a string \"mask_ref\"";
  }
  return "unknown tool kind";
}

ToolResult dispatch(const ActionCommand& cmd, const ToolRegistry& registry,
                    const std::optional<std::string>& image_ref,
                    const DispatchOptions& options) {
  const ToolDescriptor* tool = registry.find(cmd.tool_name);
  if (!tool) {
    std::string names;
    for (const auto& n : registry.names()) {
      if (!names.empty()) names += ", ";
      names += n;
    }
    throw UnknownToolError("unknown tool \"" + cmd.tool_name +
                           "\"; registered tools: " + names);
  }
  std::string problem = validate_arguments(*tool, cmd.arguments);
  if (!problem.empty()) throw Error(problem);

  ToolResult result;
  result.tool = tool->name;

  ojson request;
  request["arguments"] = cmd.arguments;
  if (image_ref) request["image_ref"] = *image_ref;
  std::string body = request.dump();

  auto started = std::chrono::steady_clock::now();
  auto finish = [&result, started]() {
    result.latency_ms =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - started)
            .count();
  };

  auto [base, path] = split_endpoint(tool->endpoint);
  std::mt19937_64 jitter_rng(std::random_device{}());
  std::string last_error;
  for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
    if (attempt > 0) {
      std::uniform_int_distribution<int> jitter(0, 50 * attempt);
      std::this_thread::sleep_for(
          std::chrono::milliseconds(100 * attempt + jitter(jitter_rng)));
    }
    httplib::Client client(base);
    client.set_connection_timeout(0, options.timeout_ms * 1000);
    client.set_read_timeout(options.timeout_ms / 1000,
                            (options.timeout_ms % 1000) * 1000);
    auto res = client.Post(path, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;  // transport failures are the only retried class
    }
    finish();
    if (res->status != 200) {
      result.status = ToolResult::Status::error;
      result.diagnostic =
          "tool endpoint returned HTTP " + std::to_string(res->status);
      return result;
    }
    ojson payload = ojson::parse(res->body, nullptr, false);
    if (payload.is_discarded()) {
      result.status = ToolResult::Status::error;
      result.diagnostic = "tool endpoint returned invalid JSON";
      return result;
    }
    std::string schema_problem = validate_payload(tool->kind, payload);
    if (!schema_problem.empty()) {
      result.status = ToolResult::Status::error;
      result.diagnostic = "schema-invalid response: " + schema_problem;
      return result;
    }
    result.status = ToolResult::Status::ok;
    result.payload = payload;
    return result;
  }
  finish();
  result.status = ToolResult::Status::error;
  result.diagnostic = "tool call failed after " +
                      std::to_string(options.max_retries + 1) +
                      " attempts: " + last_error;
  return result;
}

namespace {

std::string format_tenths(std::uint64_t tenths) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%llu.%llu",
                static_cast<unsigned long long>(tenths / 10),
                static_cast<unsigned long long>(tenths % 10));
  return buf;
}

// Largest-remainder apportionment in tenths of a percent: the column always
// sums to exactly 100.0 for any non-zero count vector.
std::vector<std::uint64_t> percentage_tenths(
    const std::vector<std::uint64_t>& counts) {
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  std::vector<std::uint64_t> tenths(counts.size(), 0);
  if (total == 0) return tenths;
  std::uint64_t assigned = 0;
  std::vector<std::pair<std::uint64_t, std::size_t>> remainders;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::uint64_t numer = counts[i] * 1000;
    tenths[i] = numer / total;
    assigned += tenths[i];
    remainders.push_back({numer % total, i});
  }
  std::sort(remainders.begin(), remainders.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first > b.first;
              return a.second < b.second;
            });
  for (std::size_t r = 0; assigned < 1000 && r < remainders.size(); ++r) {
    ++tenths[remainders[r].second];
    ++assigned;
  }
  return tenths;
}

}  // namespace

std::string compose_result(const ActionCommand& cmd,
                           const ToolResult& result) {
  if (result.status != ToolResult::Status::ok) {
    return "I'm sorry, the " + cmd.tool_name +
           " tool could not complete the request: " + result.diagnostic;
  }
  // ok payloads passed validate_payload, so the shape identifies the kind
  if (result.payload.contains("detections")) {
    std::vector<std::string> classes;
    std::vector<std::uint64_t> counts;
    for (const auto& d : result.payload["detections"]) {
      classes.push_back(d["class"].get<std::string>());
      counts.push_back(d["count"].get<std::uint64_t>());
    }
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    auto tenths = percentage_tenths(counts);
    std::string out = "| Class | Count | Percentage |\n| --- | --- | --- |\n";
    for (std::size_t i = 0; i < classes.size(); ++i) {
      out += "| " + classes[i] + " | " + std::to_string(counts[i]) + " | " +
             format_tenths(tenths[i]) + " |\n";
    }
    out += "\nTotal: " + std::to_string(total);
    return out;
  }
  if (result.payload.contains("label")) {
    char conf[16];
    std::snprintf(conf, sizeof(conf), "%.2f",
                  result.payload["confidence"].get<double>());
    return "The " + cmd.tool_name + " model classified the image as \"" +
           result.payload["label"].get<std::string>() +
           "\" with confidence " + conf + ".";
  }
  if (result.payload.contains("image_ref")) {
    return "Generated image: " +
           result.payload["image_ref"].get<std::string>();
  }
  if (result.payload.contains("mask_ref")) {
    return "Segmentation mask: " +
           result.payload["mask_ref"].get<std::string>();
  }
  return "I'm sorry, the " + cmd.tool_name + " tool returned nothing usable.";
}

struct Service::Impl {
  httplib::Server server;
  std::thread worker;
  std::atomic<int> bound_port{0};
};

Service::Service(const ServeConfig& config)
    : config_(config), impl_(new Impl) {
  try {
    index_ = vecindex::load_index(config.index_path);
  } catch (const Error& e) {
    throw Error("cannot load index " + config.index_path + ": " + e.what());
  }
  index_digest_ = file_digest(config.index_path);
  if (!config.metadata_path.empty()) {
    for_each_jsonl_file(
        config.metadata_path, [&](std::size_t offset, const ojson& obj) {
          if (!obj.contains("id")) {
            throw FramingError("metadata line missing id", offset);
          }
          std::uint64_t id =
              obj["id"].is_string()
                  ? std::stoull(obj["id"].get<std::string>())
                  : obj["id"].get<std::uint64_t>();
          metadata_[id] = {obj.value("title", std::string()),
                           obj.value("abstract_text", std::string())};
        });
  }
  if (!config.registry_path.empty()) {
    registry_ = ToolRegistry::load(config.registry_path);
  }

  impl_->server.Get("/v1/ready",
                    [this](const httplib::Request&, httplib::Response& res) {
                      res.set_content(handle_ready().dump(),
                                      "application/json");
                    });
  auto post = [this](const char* route,
                     ojson (Service::*handler)(const ojson&, int&) const) {
    impl_->server.Post(
        route, [this, handler](const httplib::Request& req,
                               httplib::Response& res) {
          int status = 200;
          ojson reply;
          ojson body = ojson::parse(req.body, nullptr, false);
          if (body.is_discarded() || !body.is_object()) {
            status = 400;
            reply["error"] = "request body must be a JSON object";
          } else {
            try {
              reply = (this->*handler)(body, status);
            } catch (const std::exception& e) {
              status = 500;
              reply = ojson{{"error", e.what()}};
            }
          }
          res.status = status;
          res.set_content(reply.dump(), "application/json");
        });
  };
  post("/v1/retrieve", &Service::handle_retrieve);
  post("/v1/act", &Service::handle_act);
}

Service::~Service() { stop(); }

int Service::start() {
  int port = config_.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(config_.host);
    if (port < 0) throw Error("cannot bind to " + config_.host);
  } else if (!impl_->server.bind_to_port(config_.host, port)) {
    throw Error("cannot bind to " + config_.host + ":" +
                std::to_string(port));
  }
  impl_->bound_port = port;
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

int Service::run() {
  int port = start();
  impl_->worker.join();
  return port;
}

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
  if (impl_ && impl_->worker.joinable() &&
      impl_->worker.get_id() != std::this_thread::get_id()) {
    impl_->worker.join();
  }
}

ojson Service::handle_ready() const {
  ojson obj;
  obj["status"] = "ready";
  obj["vectors"] = index_.total_count;
  obj["tools"] = registry_.size();
  obj["index_digest"] = index_digest_;
  return obj;
}

std::vector<ContextBlock> Service::retrieve_context(
    const std::vector<float>& query, std::size_t k, std::size_t nprobe) const {
  if (query.size() != index_.dim()) {
    throw Error("query dimension " + std::to_string(query.size()) +
                " does not match index dimension " +
                std::to_string(index_.dim()));
  }
  auto hits = vecindex::search(index_, query.data(), {k, nprobe});
  std::vector<ContextBlock> blocks;
  blocks.reserve(hits.size());
  for (const auto& hit : hits) {
    ContextBlock block;
    block.id = hit.id;
    block.score = hit.score;
    auto it = metadata_.find(hit.id);
    if (it != metadata_.end()) {
      block.title = it->second.title;
      // deterministic excerpt: leading slice of the abstract
      block.excerpt = it->second.abstract_text.substr(0, 240);
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

ojson Service::handle_retrieve(const ojson& body, int& http_status) const {
  bool has_embedding = body.contains("embedding");
  bool has_text = body.contains("text");
  if (has_embedding == has_text) {
    http_status = 400;
    return ojson{{"error", "supply exactly one of \"embedding\" or \"text\""}};
  }
  std::size_t k = body.value("k", 10u);
  std::size_t nprobe;
  if (!body.contains("nprobe")) {
    nprobe = vecindex::default_nprobe(index_.centroids.k);
  } else if (body["nprobe"].is_string()) {
    if (body["nprobe"].get<std::string>() != "all") {
      http_status = 400;
      return ojson{{"error", "nprobe must be a positive integer or \"all\""}};
    }
    nprobe = index_.centroids.k;
  } else {
    nprobe = body["nprobe"].get<std::size_t>();
  }

  std::vector<float> query;
  if (has_embedding) {
    if (!body["embedding"].is_array()) {
      http_status = 400;
      return ojson{{"error", "embedding must be an array of numbers"}};
    }
    query = body["embedding"].get<std::vector<float>>();
  } else {
    if (config_.embedder_endpoint.empty() && config_.fixture_dir.empty()) {
      http_status = 400;
      return ojson{{"error", "text queries need a configured embedder"}};
    }
    TextTransformClient::Options opts;
    if (!config_.fixture_dir.empty()) {
      opts.mode = TextTransformClient::Mode::replay;
      opts.fixture_dir = config_.fixture_dir;
    } else {
      opts.mode = TextTransformClient::Mode::http;
      opts.endpoint = config_.embedder_endpoint;
    }
    opts.timeout_ms = config_.timeout_ms;
    opts.max_retries = config_.max_retries;
    try {
      TextTransformClient embedder(opts);
      auto resp = embedder.call({"embed_text",
                                 body["text"].get<std::string>(), ""});
      query = resp.embedding;
    } catch (const ClientError& e) {
      http_status = 502;
      return ojson{{"error", std::string("embedder unavailable: ") + e.what()}};
    }
  }
  if (query.size() != index_.dim()) {
    http_status = 400;
    return ojson{{"error", "query dimension " + std::to_string(query.size()) +
                               " does not match index dimension " +
                               std::to_string(index_.dim())}};
  }
  auto blocks = retrieve_context(query, k, nprobe == 0 ? 1 : nprobe);
  ojson results = ojson::array();
  for (const auto& b : blocks) {
    ojson r;
    r["id"] = b.id;
    r["score"] = b.score;
    r["title"] = b.title;
    r["excerpt"] = b.excerpt;
    results.push_back(r);
  }
  return ojson{{"results", results}};
}

ojson Service::handle_act(const ojson& body, int& http_status) const {
  if (!body.contains("assistant_text") ||
      !body["assistant_text"].is_string()) {
    http_status = 400;
    return ojson{{"error", "body needs a string \"assistant_text\""}};
  }
  std::optional<ActionCommand> cmd;
  try {
    cmd = parse_action(body["assistant_text"].get<std::string>());
  } catch (const ActionParseError& e) {
    http_status = 400;
    return ojson{{"error", e.what()}};
  }
  if (!cmd) return ojson::object();  // no action present: empty response

  std::optional<std::string> image_ref;
  if (body.contains("image_ref")) {
    image_ref = body["image_ref"].get<std::string>();
  }
  ToolResult result;
  try {
    DispatchOptions opts;
    opts.timeout_ms = config_.timeout_ms;
    opts.max_retries = config_.max_retries;
    result = dispatch(*cmd, registry_, image_ref, opts);
  } catch (const Error& e) {
    http_status = 400;  // caller fault: unknown tool or invalid arguments
    return ojson{{"error", e.what()}};
  }

  ojson reply;
  reply["command"] = ojson{{"tool", cmd->tool_name},
                           {"arguments", cmd->arguments}};
  ojson res;
  res["tool"] = result.tool;
  res["status"] = result.status == ToolResult::Status::ok ? "ok" : "error";
  res["payload"] = result.payload;
  res["latency_ms"] = result.latency_ms;
  if (!result.diagnostic.empty()) res["diagnostic"] = result.diagnostic;
  reply["result"] = res;
  reply["composed_text"] = compose_result(*cmd, result);
  return reply;
}

}  // namespace pathkit::service
