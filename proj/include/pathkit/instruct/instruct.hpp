#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pathkit/align/align.hpp"
#include "pathkit/core/client.hpp"
#include "pathkit/core/diagnostics.hpp"
#include "pathkit/core/jsonl.hpp"
#include "pathkit/service/registry.hpp"

namespace pathkit::instruct {

enum class Role { user, assistant };

struct Turn {
  Role role = Role::user;
  std::string text;
  bool has_image = false;  // user turns only
};

enum class Family { description, conversation, invocation };

const char* to_string(Family f);
Family family_from_string(const std::string& s);

struct InstructionSample {
  std::string sample_id;
  std::string system_message;
  std::vector<Turn> turns;
  Family family = Family::description;
  std::string source_ref;
};

// Enforces the sample shape: turns alternate starting with user, the last
// turn is assistant, at most one turn carries the image and it is a user
// turn. Throws on violation.
void validate_sample(const InstructionSample& sample);

ojson sample_to_json(const InstructionSample& sample);
InstructionSample sample_from_json(const ojson& obj);

// Serialized training text plus the half-open byte ranges of the assistant
// responses (the only spans that contribute to the loss).
struct SerializedDialogue {
  std::string text;
  std::vector<std::pair<std::size_t, std::size_t>> response_spans;
};

// The stock system message for generated dialogues.
std::string default_system_message();

// Layout per turn: "User: "/"Assistant: " prefix, "<image_token>\n" before
// user text on the image-carrying turn, the turn text, then the "###" stop
// marker and a newline. The system message leads with the same stop/newline.
// "###" inside the system message or any turn text is rejected (the format
// has no escape convention).
SerializedDialogue serialize_dialogue(const InstructionSample& sample);

// mask[t] = true iff token t's byte range [start, end) lies entirely inside
// some response span. Offsets must be ordered, non-overlapping and within
// the text.
std::vector<bool> spans_to_token_mask(
    const SerializedDialogue& sd,
    const std::vector<std::pair<std::size_t, std::size_t>>& token_offsets);

struct TemplatePool {
  int version = 0;
  std::vector<std::string> templates;
};

// {"version": n, "templates": [...]}
TemplatePool load_template_pool(const std::string& path);

// One description sample per pair: a seeded, sample_id-keyed template draw
// for the user turn (image attached), the pair's caption as the response.
// Deterministic in (pairs, pool, seed), independent of evaluation order.
std::vector<InstructionSample> gen_description_samples(
    const std::vector<align::AlignedPair>& pairs, const TemplatePool& pool,
    std::uint64_t seed);

// Asks the text-transform client for conversational Q&A turns per caption
// (task gen_conversation, parts labeled q/a alternating). Invalid or failed
// responses skip the pair with a diagnostic.
std::vector<InstructionSample> gen_conversation_samples(
    const std::vector<align::AlignedPair>& pairs,
    const TextTransformClient& client, DiagnosticsSink* diags = nullptr);

struct InvocationScenario {
  std::string tool;
  std::vector<std::string> variants;  // user utterances
  ojson arguments = ojson::object();
  std::optional<bool> has_image;  // default: tools other than generate
};

std::vector<InvocationScenario> load_scenarios(const std::string& path);

// One sample per (scenario, variant): the variant as the user turn and a
// serialized action block for the named tool as the assistant turn.
// Unknown tools are an error.
std::vector<InstructionSample> gen_invocation_samples(
    const std::vector<InvocationScenario>& scenarios,
    const service::ToolRegistry& registry);

// The action block the invocation samples embed and the service parses:
// <action>{"tool": ..., "arguments": {...}}</action>
std::string action_block(const std::string& tool, const ojson& arguments);

}  // namespace pathkit::instruct
