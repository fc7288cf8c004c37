#include "pathkit/core/client.hpp"

#include <chrono>
#include <filesystem>
#include <random>
#include <thread>

#include "httplib.h"

#include "pathkit/core/digest.hpp"
#include "pathkit/core/error.hpp"
#include "http_util.hpp"

namespace pathkit {

ojson TransformRequest::to_json() const {
  ojson obj;
  obj["task"] = task;
  obj["input"] = input;
  if (!prompt_template_id.empty()) {
    obj["prompt_template_id"] = prompt_template_id;
  }
  return obj;
}

TransformResponse TransformResponse::from_json(const ojson& obj) {
  TransformResponse resp;
  if (obj.contains("text")) resp.text = obj["text"].get<std::string>();
  if (obj.contains("parts")) {
    for (const auto& part : obj["parts"]) {
      resp.parts.push_back({part.value("label", std::string()),
                            part.value("text", std::string())});
    }
  }
  if (obj.contains("embedding")) {
    resp.embedding = obj["embedding"].get<std::vector<float>>();
  }
  return resp;
}

ojson TransformResponse::to_json() const {
  ojson obj;
  if (text) obj["text"] = *text;
  if (!parts.empty()) {
    ojson arr = ojson::array();
    for (const auto& p : parts) {
      ojson part;
      part["label"] = p.label;
      part["text"] = p.text;
      arr.push_back(part);
    }
    obj["parts"] = arr;
  }
  if (!embedding.empty()) obj["embedding"] = embedding;
  return obj;
}

TextTransformClient::TextTransformClient(Options options)
    : options_(std::move(options)) {
  if (options_.mode != Mode::http && options_.fixture_dir.empty()) {
    throw Error("fixture_dir required for record/replay client mode");
  }
  if (options_.mode != Mode::replay && options_.endpoint.empty()) {
    throw Error("endpoint required for http/record client mode");
  }
}

std::string TextTransformClient::fixture_filename(
    const TransformRequest& request) {
  return request.task + "-" + hex64(fnv1a64(request.to_json().dump())) +
         ".json";
}

void TextTransformClient::write_fixture(const std::string& fixture_dir,
                                        const TransformRequest& request,
                                        const TransformResponse& response) {
  std::filesystem::create_directories(fixture_dir);
  ojson obj;
  obj["request"] = request.to_json();
  obj["response"] = response.to_json();
  std::string path =
      (std::filesystem::path(fixture_dir) / fixture_filename(request))
          .string();
  write_file_atomic(path, obj.dump(2) + "\n");
}

namespace {

TransformResponse http_call(const TextTransformClient::Options& options,
                            const TransformRequest& request) {
  std::string body = request.to_json().dump();
  auto [base, path] = split_endpoint(options.endpoint);
  std::mt19937_64 jitter_rng(std::random_device{}());
  std::string last_error;
  for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
    if (attempt > 0) {
      // jittered backoff; transport errors only ever get here
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
      continue;
    }
    if (res->status != 200) {
      // a definite (non-transport) answer; do not retry
      throw ClientError("transform endpoint returned HTTP " +
                        std::to_string(res->status));
    }
    ojson parsed = ojson::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) {
      throw ClientError("transform endpoint returned invalid JSON");
    }
    return TransformResponse::from_json(parsed);
  }
  throw ClientError("transform call failed after " +
                    std::to_string(options.max_retries + 1) +
                    " attempts: " + last_error);
}

}  // namespace

TransformResponse TextTransformClient::call(
    const TransformRequest& request) const {
  switch (options_.mode) {
    case Mode::replay: {
      std::string path = (std::filesystem::path(options_.fixture_dir) /
                          fixture_filename(request))
                             .string();
      if (!std::filesystem::exists(path)) {
        throw ClientError("no fixture for request (task " + request.task +
                          "): " + path);
      }
      ojson obj = ojson::parse(read_file(path));
      if (obj.value("request", ojson()) != request.to_json()) {
        throw ClientError("fixture request mismatch: " + path);
      }
      return TransformResponse::from_json(obj.at("response"));
    }
    case Mode::record: {
      TransformResponse resp = http_call(options_, request);
      write_fixture(options_.fixture_dir, request, resp);
      return resp;
    }
    case Mode::http:
      return http_call(options_, request);
  }
  throw Error("unreachable client mode");
}

}  // namespace pathkit
