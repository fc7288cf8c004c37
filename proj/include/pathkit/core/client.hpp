#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pathkit/core/jsonl.hpp"

namespace pathkit {

// Wire contract for the external text-transform / embedder service:
// request  {task, input[, prompt_template_id]}
// response {parts:[{label,text}]} | {text} | {embedding:[...]}
// Tasks used by the pipeline: split_caption, refine_caption,
// gen_conversation, embed_text.
struct TransformRequest {
  std::string task;
  std::string input;
  std::string prompt_template_id;  // opaque, operator-supplied

  ojson to_json() const;
};

struct TransformPart {
  std::string label;
  std::string text;
};

struct TransformResponse {
  std::optional<std::string> text;
  std::vector<TransformPart> parts;
  std::vector<float> embedding;

  static TransformResponse from_json(const ojson& obj);
  ojson to_json() const;
};

// HTTP client with a mandatory record/replay fixture mode so every pipeline
// stage that talks to an external model can run hermetically.
//   http:   POST to `endpoint`, bounded retries on transport failure.
//   record: POST, then persist {request, response} under fixture_dir.
//   replay: serve responses from fixture_dir; no network.
class TextTransformClient {
 public:
  enum class Mode { http, record, replay };

  struct Options {
    Mode mode = Mode::http;
    std::string endpoint;     // e.g. http://127.0.0.1:9000/transform
    std::string fixture_dir;  // required for record/replay
    int timeout_ms = 10000;
    int max_retries = 2;  // transport errors only
  };

  explicit TextTransformClient(Options options);

  // Throws ClientError after retries are exhausted or when no fixture
  // matches in replay mode.
  TransformResponse call(const TransformRequest& request) const;

  // Fixture files are "<task>-<fnv1a64(request json)>.json" holding the
  // request and response payloads verbatim.
  static std::string fixture_filename(const TransformRequest& request);
  static void write_fixture(const std::string& fixture_dir,
                            const TransformRequest& request,
                            const TransformResponse& response);

  const Options& options() const { return options_; }

 private:
  Options options_;
};

}  // namespace pathkit
