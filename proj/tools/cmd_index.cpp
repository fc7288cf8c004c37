#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

#include "pathkit/align/align.hpp"
#include "pathkit/core/embedding.hpp"
#include "pathkit/service/service.hpp"
#include "pathkit/vecindex/ivf.hpp"

#include "cli_common.hpp"
#include "commands.hpp"

namespace pathkit::cli {

int cmd_index_build(const IndexBuildArgs& args) {
  std::string manifest_path =
      args.run_manifest.empty()
          ? default_manifest_path(args.output, "index-build")
          : args.run_manifest;
  RunManifest manifest("index-build", manifest_path);

  auto emb = validated([&] {
    return align::l2_normalize(load_embeddings(args.emb));
  });
  auto id_lines = validated([&] { return load_ids(args.ids); });
  if (id_lines.size() != emb.n_rows) {
    throw ValidationError("id file has " + std::to_string(id_lines.size()) +
                          " lines for " + std::to_string(emb.n_rows) +
                          " vectors");
  }
  std::vector<std::uint64_t> ids;
  ids.reserve(id_lines.size());
  for (const auto& line : id_lines) {
    try {
      ids.push_back(std::stoull(line));
    } catch (const std::exception&) {
      throw ValidationError("id is not an unsigned integer: " + line);
    }
  }
  manifest.add_input(args.emb);
  manifest.add_input(args.ids);

  std::size_t k = args.k_centroids
                      ? args.k_centroids
                      : vecindex::default_centroid_count(emb.n_rows);
  manifest.set_config({{"emb", args.emb},
                       {"ids", args.ids},
                       {"out", args.output},
                       {"k_centroids", k},
                       {"max_iters", args.max_iters},
                       {"seed", args.seed}});

  auto centroids = vecindex::kmeans(emb, k, args.max_iters, args.seed);
  auto index = vecindex::build_ivf(emb, ids, std::move(centroids));
  vecindex::save_index(index, args.output);
  manifest.add_output(args.output);
  manifest.set_count("vectors", index.total_count);
  manifest.set_count("centroids", index.centroids.k);
  manifest.write();
  std::cout << "index-build: " << index.total_count << " vectors, "
            << index.centroids.k << " centroids\n";
  return 0;
}

int cmd_index_search(const IndexSearchArgs& args) {
  std::string manifest_path =
      args.run_manifest.empty()
          ? default_manifest_path(args.output, "index-search")
          : args.run_manifest;
  RunManifest manifest("index-search", manifest_path);

  auto index = validated([&] { return vecindex::load_index(args.index); });
  auto queries = validated([&] {
    return align::l2_normalize(load_embeddings(args.query_emb));
  });
  if (queries.dim != index.dim()) {
    throw ValidationError("query dimension " + std::to_string(queries.dim) +
                          " does not match index dimension " +
                          std::to_string(index.dim()));
  }
  manifest.add_input(args.index);
  manifest.add_input(args.query_emb);

  std::size_t nprobe;
  if (args.nprobe == "all") {
    nprobe = index.centroids.k;
  } else {
    try {
      nprobe = std::stoull(args.nprobe);
    } catch (const std::exception&) {
      throw ValidationError("--nprobe must be a positive integer or \"all\"");
    }
    if (nprobe == 0) throw ValidationError("--nprobe must be >= 1");
  }
  manifest.set_config({{"index", args.index},
                       {"query_emb", args.query_emb},
                       {"k", args.k},
                       {"nprobe", args.nprobe}});

  std::vector<ojson> lines;
  for (std::size_t q = 0; q < queries.n_rows; ++q) {
    auto hits = vecindex::search(index, queries.row(q), {args.k, nprobe});
    ojson obj;
    obj["query_index"] = q;
    ojson results = ojson::array();
    for (const auto& h : hits) {
      std::cout << "query " << q << ": " << h.id << " " << h.score << "\n";
      results.push_back(ojson{{"id", h.id}, {"score", h.score}});
    }
    obj["results"] = results;
    lines.push_back(std::move(obj));
  }
  if (!args.output.empty()) {
    write_jsonl_atomic(args.output, lines);
    manifest.add_output(args.output);
  }
  manifest.set_count("queries", queries.n_rows);
  manifest.write();
  return 0;
}

namespace {

volatile std::sig_atomic_t g_stop_requested = 0;

void handle_stop_signal(int) { g_stop_requested = 1; }

}  // namespace

int cmd_serve(const ServeArgs& args) {
  service::ServeConfig config;
  std::size_t colon = args.bind.rfind(':');
  if (colon == std::string::npos) {
    throw ValidationError("--bind must be host:port");
  }
  config.host = args.bind.substr(0, colon);
  try {
    config.port = std::stoi(args.bind.substr(colon + 1));
  } catch (const std::exception&) {
    throw ValidationError("--bind must be host:port");
  }
  config.index_path = args.index;
  config.metadata_path = args.meta;
  config.registry_path = args.registry;
  config.embedder_endpoint = args.embedder_endpoint;
  config.fixture_dir = args.fixtures;
  config.timeout_ms = args.timeout_ms;

  auto svc = validated([&] { return std::make_unique<service::Service>(config); });

  std::string manifest_path = args.run_manifest.empty()
                                  ? default_manifest_path("", "serve")
                                  : args.run_manifest;
  RunManifest manifest("serve", manifest_path);
  manifest.set_config({{"index", args.index},
                       {"meta", args.meta},
                       {"registry", args.registry},
                       {"bind", args.bind}});
  manifest.add_input(args.index);
  if (!args.meta.empty()) manifest.add_input(args.meta);
  if (!args.registry.empty()) manifest.add_input(args.registry);
  manifest.set_count("vectors", svc->index().total_count);
  manifest.set_count("tools", svc->registry().size());
  manifest.write();

  int port = svc->start();
  std::cout << "serving on " << config.host << ":" << port << " ("
            << svc->index().total_count << " vectors, "
            << svc->registry().size() << " tools)" << std::endl;

  std::signal(SIGINT, handle_stop_signal);
  std::signal(SIGTERM, handle_stop_signal);
  while (!g_stop_requested) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  std::cout << "shutting down\n";
  svc->stop();
  return 0;
}

}  // namespace pathkit::cli
