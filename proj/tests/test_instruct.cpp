#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "pathkit/core/error.hpp"
#include "pathkit/instruct/instruct.hpp"
#include "pathkit/service/service.hpp"
#include "testutil.hpp"

using namespace pathkit;
using namespace pathkit::instruct;

namespace {

InstructionSample simple_sample(const std::string& system,
                                const std::string& user,
                                const std::string& assistant,
                                bool image = true) {
  InstructionSample s;
  s.sample_id = "t1";
  s.system_message = system;
  s.family = Family::description;
  s.turns = {{Role::user, user, image}, {Role::assistant, assistant, false}};
  return s;
}

align::AlignedPair make_pair(const std::string& parent, int panel,
                             const std::string& caption) {
  align::AlignedPair p;
  p.parent_record_id = parent;
  p.panel_index = panel;
  p.caption = caption;
  p.similarity = 0.9;
  return p;
}

TemplatePool small_pool() {
  return {1,
          {"Describe the image in detail.", "What does this image show?",
           "Summarize the findings."}};
}

}  // namespace

TEST_CASE("default system message matches the training format verbatim") {
  std::string msg = default_system_message();
  CHECK(msg ==
        "A dialogue between a professional pathology assistant and a human. "
        "The assistant provide informative, helpful, and detailed answers.");
  CHECK(msg.find("###") == std::string::npos);
  CHECK(default_system_message().size() == msg.size());
}

TEST_CASE("serialize_dialogue emits the documented layout byte for byte") {
  auto sd = serialize_dialogue(simple_sample("S", "describe", "a tumor"));
  CHECK(sd.text ==
        "S###\nUser: <image_token>\ndescribe###\nAssistant: a tumor###\n");
  REQUIRE(sd.response_spans.size() == 1);
  auto [b, e] = sd.response_spans[0];
  CHECK(sd.text.substr(b, e - b) == "a tumor");
}

TEST_CASE("each assistant turn owns one span, in order") {
  InstructionSample s;
  s.sample_id = "multi";
  s.system_message = "sys";
  s.family = Family::conversation;
  s.turns = {{Role::user, "q1", true},
             {Role::assistant, "a1", false},
             {Role::user, "q2", false},
             {Role::assistant, "a2", false}};
  auto sd = serialize_dialogue(s);
  REQUIRE(sd.response_spans.size() == 2);
  CHECK(sd.response_spans[0].second <= sd.response_spans[1].first);
  CHECK(sd.text.substr(sd.response_spans[0].first,
                       sd.response_spans[0].second -
                           sd.response_spans[0].first) == "a1");
  CHECK(sd.text.substr(sd.response_spans[1].first,
                       sd.response_spans[1].second -
                           sd.response_spans[1].first) == "a2");
}

TEST_CASE("the reserved ### separator is rejected inside text") {
  CHECK_THROWS_AS(
      serialize_dialogue(simple_sample("S", "ok", "bad ### text")), Error);
  CHECK_THROWS_AS(serialize_dialogue(simple_sample("sys###", "ok", "fine")),
                  Error);
}

TEST_CASE("sample shape violations are rejected") {
  InstructionSample s = simple_sample("S", "u", "a");
  s.turns.push_back({Role::user, "dangling", false});
  CHECK_THROWS_AS(serialize_dialogue(s), Error);

  InstructionSample two_images = simple_sample("S", "u", "a");
  two_images.turns.push_back({Role::user, "u2", true});
  two_images.turns.push_back({Role::assistant, "a2", false});
  CHECK_THROWS_AS(serialize_dialogue(two_images), Error);

  InstructionSample image_on_assistant = simple_sample("S", "u", "a", false);
  image_on_assistant.turns[1].has_image = true;
  CHECK_THROWS_AS(serialize_dialogue(image_on_assistant), Error);
}

TEST_CASE("token mask marks exactly the tokens inside response spans") {
  auto sd = serialize_dialogue(simple_sample("S", "describe", "a tumor"));
  auto [rb, re] = sd.response_spans[0];

  SUBCASE("token covering the whole span is true") {
    auto mask = spans_to_token_mask(sd, {{rb, re}});
    REQUIRE(mask.size() == 1);
    CHECK(mask[0]);
  }
  SUBCASE("token straddling the span start is false") {
    auto mask = spans_to_token_mask(sd, {{rb - 1, rb + 2}});
    CHECK_FALSE(mask[0]);
  }
  SUBCASE("tokens before the first span are all false") {
    std::vector<std::pair<std::size_t, std::size_t>> offsets;
    for (std::size_t i = 0; i + 1 < rb; i += 2) offsets.push_back({i, i + 2});
    auto mask = spans_to_token_mask(sd, offsets);
    for (bool m : mask) CHECK_FALSE(m);
  }
  SUBCASE("malformed offsets are rejected") {
    CHECK_THROWS_AS(spans_to_token_mask(sd, {{5, 3}}), Error);
    CHECK_THROWS_AS(spans_to_token_mask(sd, {{0, 4}, {2, 6}}), Error);
    CHECK_THROWS_AS(
        spans_to_token_mask(sd, {{0, sd.text.size() + 1}}), Error);
  }
}

TEST_CASE("refining the tokenization never grows the masked byte set") {
  auto sd = serialize_dialogue(simple_sample(default_system_message(),
                                             "describe the image",
                                             "carcinoma with necrosis"));
  // coarse: fixed-width chunks; fine: every chunk halved
  std::vector<std::pair<std::size_t, std::size_t>> coarse, fine;
  for (std::size_t i = 0; i < sd.text.size(); i += 6) {
    std::size_t end = std::min(i + 6, sd.text.size());
    coarse.push_back({i, end});
    std::size_t mid = std::min(i + 3, end);
    fine.push_back({i, mid});
    if (mid < end) fine.push_back({mid, end});
  }
  auto coarse_mask = spans_to_token_mask(sd, coarse);
  auto fine_mask = spans_to_token_mask(sd, fine);
  auto marked_bytes = [&sd](
      const std::vector<std::pair<std::size_t, std::size_t>>& offsets,
      const std::vector<bool>& mask) {
    std::vector<bool> bytes(sd.text.size(), false);
    for (std::size_t t = 0; t < offsets.size(); ++t) {
      if (!mask[t]) continue;
      for (std::size_t b = offsets[t].first; b < offsets[t].second; ++b) {
        bytes[b] = true;
      }
    }
    return bytes;
  };
  auto coarse_bytes = marked_bytes(coarse, coarse_mask);
  auto fine_bytes = marked_bytes(fine, fine_mask);
  std::vector<bool> in_span(sd.text.size(), false);
  for (const auto& [b, e] : sd.response_spans) {
    for (std::size_t i = b; i < e; ++i) in_span[i] = true;
  }
  for (std::size_t b = 0; b < sd.text.size(); ++b) {
    // strict containment: a marked coarse byte stays marked after the
    // split, and no tokenization ever marks a byte outside the spans
    if (coarse_bytes[b]) CHECK(fine_bytes[b]);
    if (fine_bytes[b]) CHECK(in_span[b]);
    if (coarse_bytes[b]) CHECK(in_span[b]);
  }
}

TEST_CASE("serialization round-trips assistant turns byte-exactly") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    InstructionSample s;
    s.sample_id = "rt" + std::to_string(trial);
    s.system_message = default_system_message();
    s.family = Family::conversation;
    std::size_t rounds = 1 + rng() % 4;
    for (std::size_t r = 0; r < rounds; ++r) {
      s.turns.push_back(
          {Role::user, "question " + std::to_string(rng() % 1000), r == 0});
      s.turns.push_back(
          {Role::assistant, "answer " + std::to_string(rng() % 1000), false});
    }
    auto sd = serialize_dialogue(s);
    std::size_t span = 0;
    for (const auto& t : s.turns) {
      if (t.role != Role::assistant) continue;
      auto [b, e] = sd.response_spans[span++];
      CHECK(sd.text.substr(b, e - b) == t.text);
    }
    CHECK(span == sd.response_spans.size());
  }
}

TEST_CASE("description samples draw templates deterministically") {
  auto pairs = std::vector<align::AlignedPair>{make_pair("rec1", 0, "cap one"),
                                               make_pair("rec2", 1, "cap two")};
  auto pool = small_pool();
  auto a = gen_description_samples(pairs, pool, 7);
  auto b = gen_description_samples(pairs, pool, 7);
  REQUIRE(a.size() == 2);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].sample_id == b[i].sample_id);
    CHECK(a[i].turns[0].text == b[i].turns[0].text);
    bool in_pool = false;
    for (const auto& t : pool.templates) {
      if (t == a[i].turns[0].text) in_pool = true;
    }
    CHECK(in_pool);
    CHECK(a[i].turns[0].has_image);
    CHECK(a[i].turns[1].text == pairs[i].caption);
    CHECK(a[i].system_message == default_system_message());
  }
  CHECK(gen_description_samples({}, pool, 7).empty());
  CHECK_THROWS_AS(gen_description_samples(pairs, {1, {}}, 7), Error);
}

TEST_CASE("different seeds can pick different templates") {
  std::vector<align::AlignedPair> pairs;
  for (int i = 0; i < 24; ++i) {
    pairs.push_back(make_pair("r" + std::to_string(i), 0, "c"));
  }
  auto pool = small_pool();
  auto a = gen_description_samples(pairs, pool, 1);
  auto b = gen_description_samples(pairs, pool, 2);
  bool any_diff = false;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (a[i].turns[0].text != b[i].turns[0].text) any_diff = true;
  }
  CHECK(any_diff);
}

namespace {

TextTransformClient replay_client(const std::string& dir) {
  TextTransformClient::Options opts;
  opts.mode = TextTransformClient::Mode::replay;
  opts.fixture_dir = dir;
  return TextTransformClient(opts);
}

}  // namespace

TEST_CASE("conversation samples build alternating turns from Q&A parts") {
  testutil::TempDir tmp("conv");
  TransformRequest req{"gen_conversation", "caption under test", ""};
  TransformResponse resp;
  resp.parts = {{"q", "What stain is this?"},
                {"a", "H&E."},
                {"q", "Is it malignant?"},
                {"a", "Yes."}};
  TextTransformClient::write_fixture(tmp.str(), req, resp);
  auto client = replay_client(tmp.str());
  auto samples = gen_conversation_samples(
      {make_pair("rec", 0, "caption under test")}, client);
  REQUIRE(samples.size() == 1);
  REQUIRE(samples[0].turns.size() == 4);
  CHECK(samples[0].turns[0].role == Role::user);
  CHECK(samples[0].turns[0].has_image);
  CHECK_FALSE(samples[0].turns[2].has_image);
  CHECK(samples[0].turns[3].text == "Yes.");
  CHECK(samples[0].family == Family::conversation);
}

TEST_CASE("empty Q&A responses skip the pair with a diagnostic") {
  testutil::TempDir tmp("conv-empty");
  TransformRequest req{"gen_conversation", "caption", ""};
  TransformResponse resp;  // no parts
  TextTransformClient::write_fixture(tmp.str(), req, resp);
  auto client = replay_client(tmp.str());
  DiagnosticsSink diags;
  auto samples =
      gen_conversation_samples({make_pair("rec", 0, "caption")}, client,
                               &diags);
  CHECK(samples.empty());
  CHECK(diags.count() == 1);
}

TEST_CASE("one client failure among two captions yields one sample and one diagnostic") {
  testutil::TempDir tmp("conv-partial");
  TransformRequest req{"gen_conversation", "good caption", ""};
  TransformResponse resp;
  resp.parts = {{"q", "Q?"}, {"a", "A."}};
  TextTransformClient::write_fixture(tmp.str(), req, resp);
  auto client = replay_client(tmp.str());
  DiagnosticsSink diags;
  auto samples = gen_conversation_samples(
      {make_pair("r1", 0, "good caption"), make_pair("r2", 0, "no fixture")},
      client, &diags);
  CHECK(samples.size() == 1);
  CHECK(diags.count() == 1);
}

namespace {

service::ToolRegistry test_registry() {
  service::ToolRegistry registry;
  service::ToolDescriptor generation;
  generation.name = "lbc_generation";
  generation.endpoint = "http://127.0.0.1:1/gen";
  generation.kind = service::ToolKind::generate;
  generation.arg_schema = {{"prompt", {{"type", "string"}}}};
  registry.add(generation);
  service::ToolDescriptor detection;
  detection.name = "pdl1_detection";
  detection.endpoint = "http://127.0.0.1:1/det";
  detection.kind = service::ToolKind::detect;
  registry.add(detection);
  return registry;
}

}  // namespace

TEST_CASE("invocation samples embed a parseable action block") {
  InvocationScenario scenario;
  scenario.tool = "lbc_generation";
  scenario.variants = {
      "generate an image of a cell with nuclei enlarged 2-2.5 times"};
  scenario.arguments = {{"prompt", "nuclei enlarged 2-2.5 times"}};
  auto samples = gen_invocation_samples({scenario}, test_registry());
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].family == Family::invocation);
  CHECK(samples[0].turns[0].text ==
        "generate an image of a cell with nuclei enlarged 2-2.5 times");
  CHECK_FALSE(samples[0].turns[0].has_image);  // generate-kind default
  const std::string& block = samples[0].turns[1].text;
  CHECK(block.find("lbc_generation") != std::string::npos);
  auto cmd = service::parse_action(block);
  REQUIRE(cmd.has_value());
  CHECK(cmd->tool_name == "lbc_generation");
  CHECK(cmd->arguments["prompt"] == "nuclei enlarged 2-2.5 times");
}

TEST_CASE("unknown tools in scenarios are an error") {
  InvocationScenario scenario;
  scenario.tool = "not_registered";
  scenario.variants = {"do something"};
  CHECK_THROWS_AS(gen_invocation_samples({scenario}, test_registry()), Error);
}

TEST_CASE("scenario/variant products multiply out") {
  InvocationScenario a;
  a.tool = "pdl1_detection";
  a.variants = {"v1", "v2", "v3"};
  InvocationScenario b;
  b.tool = "lbc_generation";
  b.variants = {"v4", "v5", "v6"};
  auto samples = gen_invocation_samples({a, b}, test_registry());
  CHECK(samples.size() == 6);
  CHECK(samples[0].turns[0].has_image);  // detect-kind default carries image
}

TEST_CASE("samples survive a JSON round trip") {
  auto pairs = std::vector<align::AlignedPair>{make_pair("rec1", 0, "cap")};
  auto samples = gen_description_samples(pairs, small_pool(), 3);
  auto back = sample_from_json(sample_to_json(samples[0]));
  CHECK(back.sample_id == samples[0].sample_id);
  CHECK(back.system_message == samples[0].system_message);
  REQUIRE(back.turns.size() == samples[0].turns.size());
  for (std::size_t i = 0; i < back.turns.size(); ++i) {
    CHECK(back.turns[i].text == samples[0].turns[i].text);
    CHECK(back.turns[i].has_image == samples[0].turns[i].has_image);
  }
}
