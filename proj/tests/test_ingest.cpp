#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <random>
#include <sstream>

#include "pathkit/core/error.hpp"
#include "pathkit/ingest/ingest.hpp"
#include "testutil.hpp"

using namespace pathkit;
using namespace pathkit::ingest;

namespace {

const char* kArchive =
    R"({"article_id":"pmc1","figures":[{"figure_id":"f1","image_ref":"pmc1_f1.ppm","caption":"H&E stained section","width_px":640,"height_px":480},{"figure_id":"f2","image_ref":"pmc1_f2.ppm","caption":"IHC panel","width_px":800,"height_px":600}]}
{"article_id":"pmc2","figures":[{"figure_id":"f1","image_ref":"pmc2_f1.ppm","caption":"Tumor margin","width_px":512,"height_px":512}]}
)";

FigureRecord make_record(const std::string& id, const std::string& caption,
                         int w = 640, int h = 480) {
  FigureRecord r;
  r.record_id = id;
  r.article_id = "a";
  r.source = Source::pubmed;
  r.image_ref = id + ".ppm";
  r.width_px = w;
  r.height_px = h;
  r.caption = caption;
  return r;
}

std::string caption_with_words(std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += "w" + std::to_string(i);
  }
  return out;
}

}  // namespace

TEST_CASE("archive with 2 articles and 3 captioned figures parses in order") {
  std::istringstream in(kArchive);
  DiagnosticsSink diags;
  auto manifest = parse_article_archive(in, Source::pubmed, diags);
  REQUIRE(manifest.records.size() == 3);
  CHECK(manifest.records[0].record_id == "pmc1#f1");
  CHECK(manifest.records[1].record_id == "pmc1#f2");
  CHECK(manifest.records[2].record_id == "pmc2#f1");
  CHECK(manifest.counts[Source::pubmed] == 3);
  CHECK(diags.count() == 0);
}

TEST_CASE("figure with empty caption is skipped and counted") {
  std::istringstream in(
      R"({"article_id":"a1","figures":[{"figure_id":"f1","image_ref":"x.ppm","caption":"","width_px":100,"height_px":100}]})");
  DiagnosticsSink diags;
  auto manifest = parse_article_archive(in, Source::book, diags);
  CHECK(manifest.records.empty());
  CHECK(diags.count() == 1);
}

TEST_CASE("figure without image reference produces a diagnostic naming the article") {
  std::istringstream in(
      R"({"article_id":"a9","figures":[{"figure_id":"f1","caption":"a caption","width_px":100,"height_px":100}]})");
  DiagnosticsSink diags;
  auto manifest = parse_article_archive(in, Source::pubmed, diags);
  CHECK(manifest.records.empty());
  REQUIRE(diags.count() == 1);
  CHECK(diags.items()[0].message.find("a9") != std::string::npos);
}

TEST_CASE("unparseable line is a framing error with a byte offset") {
  std::string good =
      R"({"article_id":"a1","figures":[{"figure_id":"f1","image_ref":"x.ppm","caption":"c","width_px":10,"height_px":10}]})";
  std::istringstream in(good + "\nnot json at all\n");
  DiagnosticsSink diags;
  try {
    parse_article_archive(in, Source::pubmed, diags);
    FAIL("expected FramingError");
  } catch (const FramingError& e) {
    CHECK(e.byte_offset() == good.size() + 1);
  }
}

TEST_CASE("parsing is deterministic: identical bytes, identical manifests") {
  testutil::TempDir tmp("ingest-det");
  for (int round = 0; round < 2; ++round) {
    std::istringstream in(kArchive);
    DiagnosticsSink diags;
    auto manifest = parse_article_archive(in, Source::pubmed, diags);
    write_manifest(tmp.file("m" + std::to_string(round) + ".jsonl"), manifest);
  }
  CHECK(read_file(tmp.file("m0.jsonl")) == read_file(tmp.file("m1.jsonl")));
  CHECK(!read_file(tmp.file("m0.jsonl")).empty());
}

TEST_CASE("filter_pathology partitions by inclusive threshold") {
  std::vector<FigureRecord> records = {make_record("a", "x"),
                                       make_record("b", "y")};
  ScoreSidecar scores;
  scores.scores = {{"a", 0.9}, {"b", 0.3}};
  auto [kept, dropped] = filter_pathology(records, scores, 0.5,
                                          MissingScorePolicy::strict);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].record_id == "a");
  CHECK(kept[0].pathology_score == 0.9);
  REQUIRE(dropped.size() == 1);
  CHECK(dropped[0].record_id == "b");

  SUBCASE("threshold 0 keeps everything") {
    auto [all, none] =
        filter_pathology(records, scores, 0.0, MissingScorePolicy::strict);
    CHECK(all.size() == 2);
    CHECK(none.empty());
  }
  SUBCASE("boundary score is kept (>= is inclusive)") {
    ScoreSidecar boundary;
    boundary.scores = {{"a", 0.5}, {"b", 0.5}};
    auto [k2, d2] =
        filter_pathology(records, boundary, 0.5, MissingScorePolicy::strict);
    CHECK(k2.size() == 2);
    CHECK(d2.empty());
  }
}

TEST_CASE("missing scores follow the configured policy") {
  std::vector<FigureRecord> records = {make_record("a", "x"),
                                       make_record("unscored", "y")};
  ScoreSidecar scores;
  scores.scores = {{"a", 0.8}};

  SUBCASE("strict errors naming the record") {
    try {
      filter_pathology(records, scores, 0.5, MissingScorePolicy::strict);
      FAIL("expected error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("unscored") != std::string::npos);
    }
  }
  SUBCASE("drop routes them to dropped") {
    auto [kept, dropped] =
        filter_pathology(records, scores, 0.5, MissingScorePolicy::drop);
    CHECK(kept.size() == 1);
    CHECK(dropped.size() == 1);
    CHECK(dropped[0].record_id == "unscored");
  }
  SUBCASE("keep routes them to kept") {
    auto [kept, dropped] =
        filter_pathology(records, scores, 0.5, MissingScorePolicy::keep);
    CHECK(kept.size() == 2);
    CHECK(dropped.empty());
  }
}

TEST_CASE("filter_resolution uses the shorter edge, inclusive") {
  CHECK(filter_resolution(make_record("a", "c", 512, 384), 224));
  CHECK_FALSE(filter_resolution(make_record("b", "c", 300, 100), 224));
  CHECK(filter_resolution(make_record("c", "c", 224, 224), 224));
}

TEST_CASE("word gate is strictly greater-than") {
  std::vector<FigureRecord> records = {
      make_record("w13", caption_with_words(13)),
      make_record("w12", caption_with_words(12)),
      make_record("w0", ""),
  };
  auto kept = select_by_caption_words(records, 12);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].record_id == "w13");
}

TEST_CASE("token bounds are strict in both directions") {
  auto counter = whitespace_token_counter();
  std::vector<FigureRecord> records = {
      make_record("t51", caption_with_words(51)),
      make_record("t50", caption_with_words(50)),
      make_record("t76", caption_with_words(76)),
      make_record("t77", caption_with_words(77)),
  };
  auto over50 = select_by_caption_tokens(
      records, counter, {TokenBound::Kind::greater_than, 50});
  REQUIRE(over50.size() == 2);
  CHECK(over50[0].record_id == "t51");
  CHECK(over50[1].record_id == "t76");

  auto under77 = select_by_caption_tokens(
      records, counter, {TokenBound::Kind::fewer_than, 77});
  REQUIRE(under77.size() == 3);
  CHECK(under77[0].record_id == "t51");
  CHECK(under77[1].record_id == "t50");
  CHECK(under77[2].record_id == "t76");
}

TEST_CASE("tokenizer failure skips the record with a diagnostic") {
  TokenCounter flaky = [](const std::string& text)
      -> std::optional<std::size_t> {
    if (text == "boom") return std::nullopt;
    return count_words(text);
  };
  std::vector<FigureRecord> records = {make_record("ok", caption_with_words(5)),
                                       make_record("bad", "boom")};
  DiagnosticsSink diags;
  auto kept = select_by_caption_tokens(records, flaky,
                                       {TokenBound::Kind::greater_than, 1},
                                       &diags);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].record_id == "ok");
  CHECK(diags.count() == 1);
}

TEST_CASE("filters are order-independent pure partitions") {
  std::mt19937_64 rng(404);
  std::vector<FigureRecord> records;
  ScoreSidecar scores;
  for (int i = 0; i < 60; ++i) {
    auto r = make_record("r" + std::to_string(i),
                         caption_with_words(rng() % 25),
                         100 + static_cast<int>(rng() % 400),
                         100 + static_cast<int>(rng() % 400));
    scores.scores[r.record_id] = static_cast<double>(rng() % 100) / 100.0;
    records.push_back(std::move(r));
  }
  auto apply_words = [](const std::vector<FigureRecord>& in) {
    return select_by_caption_words(in, 12);
  };
  auto apply_res = [](const std::vector<FigureRecord>& in) {
    std::vector<FigureRecord> out;
    for (const auto& r : in) {
      if (filter_resolution(r, 224)) out.push_back(r);
    }
    return out;
  };
  auto apply_path = [&scores](const std::vector<FigureRecord>& in) {
    return filter_pathology(in, scores, 0.5, MissingScorePolicy::strict).first;
  };

  auto ids = [](const std::vector<FigureRecord>& v) {
    std::vector<std::string> out;
    for (const auto& r : v) out.push_back(r.record_id);
    return out;
  };
  auto abc = ids(apply_path(apply_res(apply_words(records))));
  auto cba = ids(apply_words(apply_res(apply_path(records))));
  auto bac = ids(apply_res(apply_path(apply_words(records))));
  CHECK(abc == cba);
  CHECK(abc == bac);

  // partition: kept + dropped = input, order preserved
  auto [kept, dropped] =
      filter_pathology(records, scores, 0.5, MissingScorePolicy::strict);
  CHECK(kept.size() + dropped.size() == records.size());
  auto pos = [&records](const std::string& id) {
    return std::find_if(records.begin(), records.end(),
                        [&](const FigureRecord& r) {
                          return r.record_id == id;
                        }) -
           records.begin();
  };
  for (std::size_t i = 1; i < kept.size(); ++i) {
    CHECK(pos(kept[i - 1].record_id) < pos(kept[i].record_id));
  }
  for (std::size_t i = 1; i < dropped.size(); ++i) {
    CHECK(pos(dropped[i - 1].record_id) < pos(dropped[i].record_id));
  }
}

TEST_CASE("score sidecar rejects out-of-range scores") {
  testutil::TempDir tmp("scores");
  write_file_atomic(tmp.file("s.jsonl"),
                    "{\"record_id\":\"a\",\"score\":1.2}\n");
  CHECK_THROWS_AS(load_score_sidecar(tmp.file("s.jsonl")), Error);
}
