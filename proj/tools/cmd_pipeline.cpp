#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "pathkit/align/align.hpp"
#include "pathkit/core/embedding.hpp"
#include "pathkit/core/parallel.hpp"
#include "pathkit/figsplit/figsplit.hpp"
#include "pathkit/ingest/ingest.hpp"
#include "pathkit/instruct/instruct.hpp"
#include "pathkit/service/registry.hpp"

#include "cli_common.hpp"
#include "commands.hpp"

namespace fs = std::filesystem;

namespace pathkit::cli {

namespace {

std::string or_default_diag(const std::string& diagnostics,
                            const std::string& out) {
  return diagnostics.empty() ? out + ".diagnostics.jsonl" : diagnostics;
}

TextTransformClient::Options client_options(const std::string& endpoint,
                                            const std::string& fixtures,
                                            int timeout_ms) {
  TextTransformClient::Options opts;
  if (!fixtures.empty()) {
    opts.mode = TextTransformClient::Mode::replay;
    opts.fixture_dir = fixtures;
  } else {
    opts.mode = TextTransformClient::Mode::http;
    opts.endpoint = endpoint;
  }
  opts.timeout_ms = timeout_ms;
  return opts;
}

}  // namespace

int cmd_ingest(const IngestArgs& args) {
  std::string manifest_path = args.run_manifest.empty()
                                  ? default_manifest_path(args.output, "ingest")
                                  : args.run_manifest;
  RunManifest manifest("ingest", manifest_path);
  manifest.set_config({{"source", args.source},
                       {"in", args.input},
                       {"out", args.output}});

  auto source = validated([&] { return ingest::source_from_string(args.source); });
  std::ifstream in(args.input, std::ios::binary);
  if (!in) throw ValidationError("cannot open input archive: " + args.input);
  manifest.add_input(args.input);

  DiagnosticsSink diags;
  ingest::CorpusManifest corpus =
      validated([&] { return ingest::parse_article_archive(in, source, diags); });
  ingest::write_manifest(args.output, corpus);

  std::string diag_path = or_default_diag(args.diagnostics, args.output);
  diags.write_file(diag_path);
  manifest.set_diagnostics(diag_path, diags);
  manifest.add_output(args.output);
  manifest.set_count("records", corpus.records.size());
  for (const auto& [src, n] : corpus.counts) {
    manifest.set_count(std::string("records_") + ingest::to_string(src), n);
  }
  manifest.write();
  std::cout << "ingest: " << corpus.records.size() << " records, "
            << diags.count() << " skipped\n";
  return 0;
}

int cmd_filter(const FilterArgs& args) {
  std::string manifest_path = args.run_manifest.empty()
                                  ? default_manifest_path(args.output, "filter")
                                  : args.run_manifest;
  RunManifest manifest("filter", manifest_path);
  ojson config{{"in", args.input}, {"out", args.output}};

  auto records = validated([&] { return ingest::read_manifest(args.input); });
  manifest.add_input(args.input);
  std::size_t input_count = records.size();

  DiagnosticsSink diags;
  std::vector<ingest::FigureRecord> dropped_all;

  if (!args.scores.empty()) {
    auto sidecar = validated([&] { return ingest::load_score_sidecar(args.scores); });
    manifest.add_input(args.scores);
    config["scores"] = args.scores;
    config["threshold"] = args.threshold;
    config["missing"] = args.missing;
    ingest::MissingScorePolicy policy;
    if (args.missing == "strict") {
      policy = ingest::MissingScorePolicy::strict;
    } else if (args.missing == "drop") {
      policy = ingest::MissingScorePolicy::drop;
    } else if (args.missing == "keep") {
      policy = ingest::MissingScorePolicy::keep;
    } else {
      throw ValidationError("--missing must be strict, drop or keep");
    }
    auto [kept, dropped] =
        ingest::filter_pathology(records, sidecar, args.threshold, policy);
    records = std::move(kept);
    manifest.set_count("dropped_pathology", dropped.size());
    for (auto& r : dropped) dropped_all.push_back(std::move(r));
  }

  if (args.min_edge) {
    config["min_edge"] = *args.min_edge;
    std::vector<ingest::FigureRecord> kept;
    for (auto& r : records) {
      if (ingest::filter_resolution(r, *args.min_edge)) {
        kept.push_back(std::move(r));
      } else {
        dropped_all.push_back(std::move(r));
      }
    }
    records = std::move(kept);
  }

  if (args.min_words) {
    config["min_words"] = *args.min_words;
    std::vector<ingest::FigureRecord> kept;
    for (auto& r : records) {
      if (ingest::count_words(r.caption) > *args.min_words) {
        kept.push_back(std::move(r));
      } else {
        dropped_all.push_back(std::move(r));
      }
    }
    records = std::move(kept);
  }

  if (args.tokens_greater_than || args.tokens_fewer_than) {
    if (args.tokens_greater_than && args.tokens_fewer_than) {
      throw ValidationError(
          "--tokens-greater-than and --tokens-fewer-than are exclusive");
    }
    ingest::TokenBound bound =
        args.tokens_greater_than
            ? ingest::TokenBound{ingest::TokenBound::Kind::greater_than,
                                 *args.tokens_greater_than}
            : ingest::TokenBound{ingest::TokenBound::Kind::fewer_than,
                                 *args.tokens_fewer_than};
    config[args.tokens_greater_than ? "tokens_greater_than"
                                    : "tokens_fewer_than"] = bound.n;
    auto kept = ingest::select_by_caption_tokens(
        records, ingest::whitespace_token_counter(), bound, &diags);
    // everything not kept goes to the dropped partition
    std::size_t ki = 0;
    for (auto& r : records) {
      if (ki < kept.size() && kept[ki].record_id == r.record_id) {
        ++ki;
      } else {
        dropped_all.push_back(std::move(r));
      }
    }
    records = std::move(kept);
  }

  ingest::CorpusManifest out_manifest;
  out_manifest.records = records;
  for (const auto& r : records) out_manifest.counts[r.source]++;
  ingest::write_manifest(args.output, out_manifest);
  manifest.add_output(args.output);
  if (!args.dropped.empty()) {
    ingest::CorpusManifest dropped_manifest;
    dropped_manifest.records = dropped_all;
    for (const auto& r : dropped_all) dropped_manifest.counts[r.source]++;
    ingest::write_manifest(args.dropped, dropped_manifest);
    manifest.add_output(args.dropped);
  }
  std::string diag_path = or_default_diag(args.diagnostics, args.output);
  diags.write_file(diag_path);
  manifest.set_diagnostics(diag_path, diags);
  manifest.set_config(config);
  manifest.set_count("input", input_count);
  manifest.set_count("kept", records.size());
  manifest.set_count("dropped", dropped_all.size());
  manifest.write();
  std::cout << "filter: kept " << records.size() << " of " << input_count
            << "\n";
  return 0;
}

int cmd_figsplit(const FigsplitArgs& args) {
  std::string manifest_path =
      args.run_manifest.empty()
          ? default_manifest_path(args.subfigs_out, "figsplit")
          : args.run_manifest;
  RunManifest manifest("figsplit", manifest_path);
  ojson config{{"in", args.input},
               {"subfigs", args.subfigs_out},
               {"subcaps", args.subcaps_out},
               {"dedup_iou", args.dedup_iou},
               {"refine", args.refine}};

  auto records = validated([&] { return ingest::read_manifest(args.input); });
  manifest.add_input(args.input);

  figsplit::DetectionSidecar sidecar;
  if (!args.boxes.empty()) {
    sidecar = validated([&] { return figsplit::load_detection_sidecar(args.boxes); });
    manifest.add_input(args.boxes);
    config["boxes"] = args.boxes;
  }
  bool with_images = !args.images_dir.empty();
  if (with_images) {
    if (args.crops_dir.empty()) {
      throw ValidationError("--crops-dir is required with --images-dir");
    }
    fs::create_directories(args.crops_dir);
    config["images_dir"] = args.images_dir;
    config["crops_dir"] = args.crops_dir;
  }

  std::optional<TextTransformClient> client;
  if (!args.transform_endpoint.empty() || !args.fixtures.empty()) {
    client.emplace(client_options(args.transform_endpoint, args.fixtures,
                                  args.timeout_ms));
    config["transform"] =
        args.fixtures.empty() ? args.transform_endpoint : "fixtures";
  }

  DiagnosticsSink diags;
  std::vector<std::vector<figsplit::SubFigure>> subfigs(records.size());
  std::vector<DiagnosticsSink> crop_diags(records.size());

  // geometry is pure per record and safe to parallelize; outputs are merged
  // in input order below
  parallel_for(records.size(), args.jobs, [&](std::size_t i) {
    const auto& record = records[i];
    std::vector<figsplit::BBox> boxes;
    auto it = sidecar.boxes.find(record.record_id);
    if (it != sidecar.boxes.end()) {
      boxes = figsplit::normalize_boxes(it->second, record.width_px,
                                        record.height_px, args.dedup_iou);
    }
    if (boxes.empty()) {
      // no detections: treat the figure as one full-size panel
      boxes.push_back({0, 0, record.width_px, record.height_px, 1.0f});
    }
    std::vector<figsplit::Raster> crops;
    if (with_images) {
      try {
        figsplit::Raster raster = figsplit::load_pnm(
            (fs::path(args.images_dir) / record.image_ref).string());
        if (raster.width != record.width_px ||
            raster.height != record.height_px) {
          // manifest dimensions rule; re-normalize against the real raster
          boxes = figsplit::normalize_boxes(boxes, raster.width,
                                            raster.height, args.dedup_iou);
          if (boxes.empty()) {
            boxes.push_back({0, 0, raster.width, raster.height, 1.0f});
          }
        }
        crops = figsplit::crop_regions(raster, boxes);
        for (std::size_t p = 0; p < crops.size(); ++p) {
          std::string name = sanitize_id(record.record_id) + "_p" +
                             std::to_string(p) +
                             (crops[p].channels == 1 ? ".pgm" : ".ppm");
          figsplit::save_pnm((fs::path(args.crops_dir) / name).string(),
                             crops[p]);
        }
      } catch (const Error& e) {
        crop_diags[i].add("figsplit", record.record_id, e.what());
        return;  // skip the record; captions without panels cannot align
      }
    }
    for (std::size_t p = 0; p < boxes.size(); ++p) {
      figsplit::SubFigure sf;
      sf.parent_record_id = record.record_id;
      sf.panel_index = static_cast<int>(p);
      sf.bbox = boxes[p];
      if (with_images) {
        std::string name = sanitize_id(record.record_id) + "_p" +
                           std::to_string(p) +
                           (crops[p].channels == 1 ? ".pgm" : ".ppm");
        sf.crop_ref = (fs::path(args.crops_dir) / name).string();
      }
      subfigs[i].push_back(std::move(sf));
    }
  });
  for (auto& sink : crop_diags) {
    for (const auto& d : sink.items()) diags.add(d.stage, d.id, d.message);
  }

  // caption work stays sequential: the client carries an in-flight budget of
  // its own and fixture replay is single-origin deterministic
  AtomicFileWriter subcap_writer(args.subcaps_out);
  std::size_t subcap_count = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (subfigs[i].empty()) continue;  // skipped above
    const auto& record = records[i];
    std::vector<figsplit::SubCaption> caps;
    if (client) {
      caps = figsplit::split_caption_llm(record.caption, *client, &diags,
                                         record.record_id);
    } else {
      caps = figsplit::split_caption_rules(record.caption);
    }
    for (auto& c : caps) {
      c.parent_record_id = record.record_id;
      if (args.refine && client) {
        auto refined =
            figsplit::refine_caption(c.text, *client, &diags, record.record_id);
        c.text = refined.text;
      }
      subcap_writer.write_line(figsplit::subcaption_to_json(c));
      ++subcap_count;
    }
  }
  subcap_writer.commit();

  AtomicFileWriter subfig_writer(args.subfigs_out);
  std::size_t subfig_count = 0;
  for (const auto& per_record : subfigs) {
    for (const auto& sf : per_record) {
      subfig_writer.write_line(figsplit::subfigure_to_json(sf));
      ++subfig_count;
    }
  }
  subfig_writer.commit();

  std::string diag_path = or_default_diag(args.diagnostics, args.subfigs_out);
  diags.write_file(diag_path);
  manifest.set_diagnostics(diag_path, diags);
  manifest.set_config(config);
  manifest.add_output(args.subfigs_out);
  manifest.add_output(args.subcaps_out);
  manifest.set_count("records", records.size());
  manifest.set_count("subfigures", subfig_count);
  manifest.set_count("subcaptions", subcap_count);
  manifest.write();
  std::cout << "figsplit: " << subfig_count << " sub-figures, "
            << subcap_count << " sub-captions\n";
  return 0;
}

int cmd_align(const AlignArgs& args) {
  std::string manifest_path = args.run_manifest.empty()
                                  ? default_manifest_path(args.output, "align")
                                  : args.run_manifest;
  RunManifest manifest("align", manifest_path);
  manifest.set_config({{"subfigs", args.subfigs},
                       {"subcaps", args.subcaps},
                       {"image_emb", args.image_emb},
                       {"text_emb", args.text_emb},
                       {"min_similarity", args.min_similarity}});

  std::vector<std::string> parents;
  std::map<std::string, std::vector<figsplit::SubFigure>> figs_by_parent;
  std::map<std::string, std::vector<figsplit::SubCaption>> caps_by_parent;
  validated([&] {
    for_each_jsonl_file(args.subfigs, [&](std::size_t, const ojson& obj) {
      auto sf = figsplit::subfigure_from_json(obj);
      if (!figs_by_parent.count(sf.parent_record_id)) {
        parents.push_back(sf.parent_record_id);
      }
      figs_by_parent[sf.parent_record_id].push_back(std::move(sf));
    });
    for_each_jsonl_file(args.subcaps, [&](std::size_t, const ojson& obj) {
      auto sc = figsplit::subcaption_from_json(obj);
      caps_by_parent[sc.parent_record_id].push_back(std::move(sc));
    });
    return 0;
  });
  manifest.add_input(args.subfigs);
  manifest.add_input(args.subcaps);

  auto image_emb = validated([&] {
    return align::l2_normalize(load_embeddings(args.image_emb));
  });
  auto image_ids = validated([&] { return load_ids(args.image_ids); });
  auto text_emb = validated([&] {
    return align::l2_normalize(load_embeddings(args.text_emb));
  });
  auto text_ids = validated([&] { return load_ids(args.text_ids); });
  if (image_ids.size() != image_emb.n_rows ||
      text_ids.size() != text_emb.n_rows) {
    throw ValidationError("embedding id file row count mismatch");
  }
  manifest.add_input(args.image_emb);
  manifest.add_input(args.text_emb);
  std::map<std::string, std::size_t> image_row, text_row;
  for (std::size_t i = 0; i < image_ids.size(); ++i) image_row[image_ids[i]] = i;
  for (std::size_t i = 0; i < text_ids.size(); ++i) text_row[text_ids[i]] = i;

  DiagnosticsSink diags;
  std::vector<std::vector<align::AlignedPair>> per_parent(parents.size());
  parallel_for(parents.size(), args.jobs, [&](std::size_t pi) {
    const auto& parent = parents[pi];
    const auto& figs = figs_by_parent.at(parent);
    auto caps_it = caps_by_parent.find(parent);
    if (caps_it == caps_by_parent.end() || caps_it->second.empty()) return;
    const auto& caps = caps_it->second;

    EmbeddingMatrix a, b;
    a.dim = b.dim = image_emb.dim;
    a.unit_norm = b.unit_norm = true;
    for (const auto& sf : figs) {
      std::string key = parent + "#p" + std::to_string(sf.panel_index);
      auto it = image_row.find(key);
      if (it == image_row.end()) return;
      a.values.insert(a.values.end(), image_emb.row(it->second),
                      image_emb.row(it->second) + image_emb.dim);
      a.n_rows++;
    }
    for (std::size_t ci = 0; ci < caps.size(); ++ci) {
      std::string key = parent + "#c" + std::to_string(ci);
      auto it = text_row.find(key);
      if (it == text_row.end()) return;
      b.values.insert(b.values.end(), text_emb.row(it->second),
                      text_emb.row(it->second) + text_emb.dim);
      b.n_rows++;
    }
    auto sim = align::cosine_similarity_matrix(a, b);
    // full matching first, threshold via drop_weak_pairs below
    auto matches = align::assign_pairs(sim, -2.0f);
    for (const auto& m : matches) {
      align::AlignedPair pair;
      pair.parent_record_id = parent;
      pair.panel_index = figs[m.row].panel_index;
      pair.panel_label = caps[m.col].panel_label;
      pair.crop_ref = figs[m.row].crop_ref;
      pair.caption = caps[m.col].text;
      pair.similarity = m.similarity;
      per_parent[pi].push_back(std::move(pair));
    }
  });

  std::vector<align::AlignedPair> all_pairs;
  std::size_t missing = 0;
  for (std::size_t pi = 0; pi < parents.size(); ++pi) {
    if (per_parent[pi].empty()) {
      ++missing;
      diags.add("align", parents[pi],
                "no pairs (missing embeddings or sub-captions)");
      continue;
    }
    for (auto& p : per_parent[pi]) all_pairs.push_back(std::move(p));
  }
  auto [kept, weak] = align::drop_weak_pairs(all_pairs, args.min_similarity);

  {
    AtomicFileWriter writer(args.output);
    for (const auto& p : kept) writer.write_line(align::aligned_pair_to_json(p));
    writer.commit();
  }
  manifest.add_output(args.output);
  if (!args.dropped.empty()) {
    AtomicFileWriter writer(args.dropped);
    for (const auto& p : weak) writer.write_line(align::aligned_pair_to_json(p));
    writer.commit();
    manifest.add_output(args.dropped);
  }
  std::string diag_path = or_default_diag(args.diagnostics, args.output);
  diags.write_file(diag_path);
  manifest.set_diagnostics(diag_path, diags);
  manifest.set_count("figures", parents.size());
  manifest.set_count("pairs", kept.size());
  manifest.set_count("weak_pairs", weak.size());
  manifest.write();
  std::cout << "align: " << kept.size() << " pairs kept, " << weak.size()
            << " below threshold\n";
  return 0;
}

int cmd_instruct(const InstructArgs& args) {
  std::string manifest_path =
      args.run_manifest.empty() ? default_manifest_path(args.output, "instruct")
                                : args.run_manifest;
  RunManifest manifest("instruct", manifest_path);
  ojson config{{"pairs", args.pairs},
               {"out", args.output},
               {"seed", args.seed},
               {"families", args.families}};

  std::vector<align::AlignedPair> pairs;
  if (!args.pairs.empty()) {
    validated([&] {
      for_each_jsonl_file(args.pairs, [&](std::size_t, const ojson& obj) {
        pairs.push_back(align::aligned_pair_from_json(obj));
      });
      return 0;
    });
    manifest.add_input(args.pairs);
  }

  DiagnosticsSink diags;
  std::vector<instruct::InstructionSample> samples;
  for (const auto& family : args.families) {
    if (family == "description") {
      auto pool = validated([&] {
        return instruct::load_template_pool(args.templates);
      });
      config["templates"] = args.templates;
      auto generated =
          instruct::gen_description_samples(pairs, pool, args.seed);
      samples.insert(samples.end(), generated.begin(), generated.end());
    } else if (family == "conversation") {
      if (args.transform_endpoint.empty() && args.fixtures.empty()) {
        throw ValidationError(
            "conversation family needs --transform-endpoint or --fixtures");
      }
      TextTransformClient client(client_options(
          args.transform_endpoint, args.fixtures, args.timeout_ms));
      auto generated = instruct::gen_conversation_samples(pairs, client, &diags);
      samples.insert(samples.end(), generated.begin(), generated.end());
    } else if (family == "invocation") {
      if (args.scenarios.empty() || args.registry.empty()) {
        throw ValidationError(
            "invocation family needs --scenarios and --registry");
      }
      auto scenarios = validated([&] {
        return instruct::load_scenarios(args.scenarios);
      });
      auto registry = validated([&] {
        return service::ToolRegistry::load(args.registry);
      });
      manifest.add_input(args.scenarios);
      manifest.add_input(args.registry);
      config["scenarios"] = args.scenarios;
      auto generated = instruct::gen_invocation_samples(scenarios, registry);
      samples.insert(samples.end(), generated.begin(), generated.end());
    } else {
      throw ValidationError("unknown family: " + family);
    }
  }

  {
    AtomicFileWriter writer(args.output);
    for (const auto& s : samples) {
      writer.write_line(instruct::sample_to_json(s));
    }
    writer.commit();
  }
  manifest.add_output(args.output);

  if (!args.serialized_out.empty()) {
    AtomicFileWriter writer(args.serialized_out);
    for (const auto& s : samples) {
      auto sd = instruct::serialize_dialogue(s);
      ojson obj;
      obj["sample_id"] = s.sample_id;
      obj["text"] = sd.text;
      ojson spans = ojson::array();
      for (const auto& [b, e] : sd.response_spans) {
        spans.push_back(ojson::array({b, e}));
      }
      obj["response_spans"] = spans;
      writer.write_line(obj);
    }
    writer.commit();
    manifest.add_output(args.serialized_out);
  }

  std::string diag_path = or_default_diag(args.diagnostics, args.output);
  diags.write_file(diag_path);
  manifest.set_diagnostics(diag_path, diags);
  manifest.set_config(config);
  manifest.set_count("pairs", pairs.size());
  manifest.set_count("samples", samples.size());
  manifest.write();
  std::cout << "instruct: " << samples.size() << " samples\n";
  return 0;
}

}  // namespace pathkit::cli
