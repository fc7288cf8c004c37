#include "pathkit/instruct/instruct.hpp"

#include <algorithm>
#include <cctype>
#include <random>

#include "pathkit/core/digest.hpp"
#include "pathkit/core/error.hpp"

namespace pathkit::instruct {

namespace {
constexpr const char* kStop = "###";
constexpr const char* kImageToken = "<image_token>";
}  // namespace

const char* to_string(Family f) {
  switch (f) {
    case Family::description:
      return "description";
    case Family::conversation:
      return "conversation";
    case Family::invocation:
      return "invocation";
  }
  return "description";
}

Family family_from_string(const std::string& s) {
  if (s == "description") return Family::description;
  if (s == "conversation") return Family::conversation;
  if (s == "invocation") return Family::invocation;
  throw Error("unknown sample family: " + s);
}

void validate_sample(const InstructionSample& sample) {
  if (sample.turns.empty()) {
    throw Error("sample " + sample.sample_id + " has no turns");
  }
  int image_turns = 0;
  for (std::size_t i = 0; i < sample.turns.size(); ++i) {
    Role expected = i % 2 == 0 ? Role::user : Role::assistant;
    if (sample.turns[i].role != expected) {
      throw Error("sample " + sample.sample_id +
                  " turns must alternate starting with user (turn " +
                  std::to_string(i) + ")");
    }
    if (sample.turns[i].has_image) {
      if (sample.turns[i].role != Role::user) {
        throw Error("sample " + sample.sample_id +
                    " attaches an image to an assistant turn");
      }
      ++image_turns;
    }
  }
  if (image_turns > 1) {
    throw Error("sample " + sample.sample_id + " has multiple image turns");
  }
  if (sample.turns.back().role != Role::assistant) {
    throw Error("sample " + sample.sample_id +
                " must end with an assistant turn");
  }
}

ojson sample_to_json(const InstructionSample& sample) {
  ojson obj;
  obj["sample_id"] = sample.sample_id;
  obj["family"] = to_string(sample.family);
  obj["system_message"] = sample.system_message;
  ojson turns = ojson::array();
  for (const auto& t : sample.turns) {
    ojson turn;
    turn["role"] = t.role == Role::user ? "user" : "assistant";
    turn["text"] = t.text;
    turn["has_image"] = t.has_image;
    turns.push_back(turn);
  }
  obj["turns"] = turns;
  if (!sample.source_ref.empty()) obj["source_ref"] = sample.source_ref;
  return obj;
}

InstructionSample sample_from_json(const ojson& obj) {
  InstructionSample s;
  s.sample_id = obj.at("sample_id").get<std::string>();
  s.family = family_from_string(obj.at("family").get<std::string>());
  s.system_message = obj.at("system_message").get<std::string>();
  for (const auto& t : obj.at("turns")) {
    Turn turn;
    std::string role = t.at("role").get<std::string>();
    if (role == "user") {
      turn.role = Role::user;
    } else if (role == "assistant") {
      turn.role = Role::assistant;
    } else {
      throw Error("unknown turn role: " + role);
    }
    turn.text = t.at("text").get<std::string>();
    turn.has_image = t.value("has_image", false);
    s.turns.push_back(std::move(turn));
  }
  s.source_ref = obj.value("source_ref", std::string());
  return s;
}

std::string default_system_message() {
  return "A dialogue between a professional pathology assistant and a human. "
         "The assistant provide informative, helpful, and detailed answers.";
}

SerializedDialogue serialize_dialogue(const InstructionSample& sample) {
  validate_sample(sample);
  if (sample.system_message.find(kStop) != std::string::npos) {
    throw Error("system message contains the reserved \"###\" separator");
  }
  for (const auto& t : sample.turns) {
    if (t.text.find(kStop) != std::string::npos) {
      throw Error("turn text contains the reserved \"###\" separator");
    }
  }
  SerializedDialogue sd;
  sd.text = sample.system_message;
  sd.text += kStop;
  sd.text += '\n';
  for (const auto& t : sample.turns) {
    if (t.role == Role::user) {
      sd.text += "User: ";
      if (t.has_image) {
        sd.text += kImageToken;
        sd.text += '\n';
      }
      sd.text += t.text;
    } else {
      sd.text += "Assistant: ";
      std::size_t begin = sd.text.size();
      sd.text += t.text;
      sd.response_spans.emplace_back(begin, sd.text.size());
    }
    sd.text += kStop;
    sd.text += '\n';
  }
  return sd;
}

std::vector<bool> spans_to_token_mask(
    const SerializedDialogue& sd,
    const std::vector<std::pair<std::size_t, std::size_t>>& token_offsets) {
  std::size_t prev_end = 0;
  for (std::size_t t = 0; t < token_offsets.size(); ++t) {
    auto [begin, end] = token_offsets[t];
    if (begin > end || end > sd.text.size() || begin < prev_end) {
      throw Error("malformed token offsets at token " + std::to_string(t));
    }
    prev_end = end;
  }
  std::vector<bool> mask(token_offsets.size(), false);
  std::size_t span = 0;
  for (std::size_t t = 0; t < token_offsets.size(); ++t) {
    auto [begin, end] = token_offsets[t];
    while (span < sd.response_spans.size() &&
           sd.response_spans[span].second < end) {
      ++span;
    }
    mask[t] = span < sd.response_spans.size() &&
              sd.response_spans[span].first <= begin &&
              end <= sd.response_spans[span].second;
  }
  return mask;
}

TemplatePool load_template_pool(const std::string& path) {
  ojson obj = ojson::parse(read_file(path));
  TemplatePool pool;
  pool.version = obj.value("version", 0);
  for (const auto& t : obj.at("templates")) {
    pool.templates.push_back(t.get<std::string>());
  }
  return pool;
}

std::vector<InstructionSample> gen_description_samples(
    const std::vector<align::AlignedPair>& pairs, const TemplatePool& pool,
    std::uint64_t seed) {
  if (pool.templates.empty()) {
    throw Error("gen_description_samples: empty template pool");
  }
  std::vector<InstructionSample> out;
  out.reserve(pairs.size());
  for (const auto& pair : pairs) {
    std::string ref =
        pair.parent_record_id + "#p" + std::to_string(pair.panel_index);
    InstructionSample s;
    s.sample_id = "desc:" + ref;
    s.system_message = default_system_message();
    s.family = Family::description;
    s.source_ref = ref;
    // per-record RNG stream keyed by sample_id, so parallel and serial runs
    // (and subsets) draw identically
    std::mt19937_64 rng(seed ^ fnv1a64(s.sample_id));
    std::size_t pick = rng() % pool.templates.size();
    s.turns.push_back({Role::user, pool.templates[pick], true});
    s.turns.push_back({Role::assistant, pair.caption, false});
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<InstructionSample> gen_conversation_samples(
    const std::vector<align::AlignedPair>& pairs,
    const TextTransformClient& client, DiagnosticsSink* diags) {
  std::vector<InstructionSample> out;
  for (const auto& pair : pairs) {
    std::string ref =
        pair.parent_record_id + "#p" + std::to_string(pair.panel_index);
    TransformResponse resp;
    try {
      resp = client.call({"gen_conversation", pair.caption, ""});
    } catch (const ClientError& e) {
      if (diags) diags->add("gen_conversation", ref, e.what());
      continue;
    }
    bool valid = !resp.parts.empty() && resp.parts.size() % 2 == 0;
    for (std::size_t i = 0; valid && i < resp.parts.size(); ++i) {
      std::string label = resp.parts[i].label;
      std::transform(label.begin(), label.end(), label.begin(),
                     [](unsigned char c) { return std::tolower(c); });
      const char* expected = i % 2 == 0 ? "q" : "a";
      if (label != expected || resp.parts[i].text.empty()) valid = false;
    }
    if (!valid) {
      if (diags) {
        diags->add("gen_conversation", ref,
                   "invalid Q&A response, sample skipped");
      }
      continue;
    }
    InstructionSample s;
    s.sample_id = "conv:" + ref;
    s.system_message = default_system_message();
    s.family = Family::conversation;
    s.source_ref = ref;
    for (std::size_t i = 0; i < resp.parts.size(); ++i) {
      bool user = i % 2 == 0;
      s.turns.push_back({user ? Role::user : Role::assistant,
                         resp.parts[i].text, user && i == 0});
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<InvocationScenario> load_scenarios(const std::string& path) {
  std::vector<InvocationScenario> out;
  for_each_jsonl_file(path, [&](std::size_t offset, const ojson& obj) {
    if (!obj.contains("tool") || !obj.contains("variants")) {
      throw FramingError("scenario line missing tool/variants", offset);
    }
    InvocationScenario sc;
    sc.tool = obj["tool"].get<std::string>();
    for (const auto& v : obj["variants"]) {
      sc.variants.push_back(v.get<std::string>());
    }
    if (obj.contains("arguments")) sc.arguments = obj["arguments"];
    if (obj.contains("has_image")) sc.has_image = obj["has_image"].get<bool>();
    out.push_back(std::move(sc));
  });
  return out;
}

std::string action_block(const std::string& tool, const ojson& arguments) {
  ojson cmd;
  cmd["tool"] = tool;
  cmd["arguments"] = arguments;
  return std::string("<action>") + cmd.dump() + "</action>";
}

std::vector<InstructionSample> gen_invocation_samples(
    const std::vector<InvocationScenario>& scenarios,
    const service::ToolRegistry& registry) {
  std::vector<InstructionSample> out;
  for (std::size_t si = 0; si < scenarios.size(); ++si) {
    const auto& sc = scenarios[si];
    const service::ToolDescriptor* tool = registry.find(sc.tool);
    if (!tool) {
      throw Error("scenario " + std::to_string(si) +
                  " names unregistered tool: " + sc.tool);
    }
    std::string problem = service::validate_arguments(*tool, sc.arguments);
    if (!problem.empty()) {
      throw Error("scenario " + std::to_string(si) + ": " + problem);
    }
    bool with_image = sc.has_image.value_or(
        tool->kind != service::ToolKind::generate);
    for (std::size_t vi = 0; vi < sc.variants.size(); ++vi) {
      InstructionSample s;
      s.sample_id =
          "invoke:" + sc.tool + ":" + std::to_string(si) + ":" +
          std::to_string(vi);
      s.system_message = default_system_message();
      s.family = Family::invocation;
      s.source_ref = sc.tool;
      s.turns.push_back({Role::user, sc.variants[vi], with_image});
      s.turns.push_back(
          {Role::assistant, action_block(sc.tool, sc.arguments), false});
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace pathkit::instruct
