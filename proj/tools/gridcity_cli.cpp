#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>

#include "gridcity/service/eval.hpp"
#include "gridcity/service/pipeline.hpp"
#include "gridcity/service/providers_factory.hpp"
#include "gridcity/service/server.hpp"

using namespace gridcity;

namespace {

struct Globals {
  std::string project = ".";
  std::string config;
  std::uint64_t seed = 0;
  bool mock = false;
  std::string fixtures;
};

EngineConfig load_engine_config(const Globals& g) { return g.config.empty() ? EngineConfig{} : load_config(g.config); }

std::shared_ptr<ModelHub> make_hub(const Globals& g, const EngineConfig& cfg) {
  ProviderOptions opts;
  opts.mock = g.mock;
  opts.seed = g.seed;
  if (!g.fixtures.empty()) opts.fixtures = g.fixtures;
  const std::filesystem::path tpl = std::filesystem::path(g.project) / "templates";
  TemplateStore templates = std::filesystem::is_directory(tpl) ? TemplateStore::from_directory(tpl) : TemplateStore{};
  return std::make_shared<ModelHub>(build_providers(cfg, opts), std::move(templates));
}

PipelineObserver stderr_progress() {
  PipelineObserver obs;
  obs.on_progress = [](const std::string& stage, double p) {
    if (p == 0.0 || p == 1.0) std::cerr << stage << (p == 0.0 ? " ..." : " done") << "\n";
  };
  obs.on_tile_end = [](int index, const TileAsset& a) {
    std::cerr << "  tile " << index << ": " << to_string(a.status) << " after " << a.iterations << " iteration(s)"
              << (a.below_threshold ? ", below threshold" : "") << "\n";
  };
  return obs;
}

RoadConnections load_roads(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  RoadConnections out;
  try {
    for (const auto& pair : nlohmann::json::parse(in)) out.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return out;
}

std::unique_ptr<Service> g_service;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridcity: grid-based 3D city generation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--project", g.project, "Project directory")->capture_default_str();
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for mock providers")->capture_default_str();
  app.add_flag("--mock", g.mock, "Use offline mock providers for every channel");
  app.add_option("--fixtures", g.fixtures, "Scripted chat replies, <dir>/<template_id>/*.txt")->check(CLI::ExistingDirectory);

  std::string prompt, grid_size, reference;
  auto* plan = app.add_subcommand("plan", "Plan the layout and describe every tile");
  plan->add_option("prompt", prompt, "City description")->required();
  plan->add_option("--grid-size", grid_size, "Force the grid size, e.g. 2x3");
  plan->add_option("--reference", reference, "Reference city looked up in corpus.jsonl");

  auto* run = app.add_subcommand("run", "plan, generate and assemble in one go");
  run->add_option("prompt", prompt, "City description")->required();
  run->add_option("--grid-size", grid_size, "Force the grid size, e.g. 2x3");
  run->add_option("--reference", reference, "Reference city looked up in corpus.jsonl");

  auto* generate = app.add_subcommand("generate", "Run the image loop for every unfinished tile");

  std::string style_file, roads_file;
  auto* assemble_cmd = app.add_subcommand("assemble", "Write scene.manifest.json and scene.gltf");
  assemble_cmd->add_option("--style", style_file, "JSON style file (road / ground materials)")->check(CLI::ExistingFile);
  assemble_cmd->add_option("--roads", roads_file, "JSON list of [tile, tile] road connections")->check(CLI::ExistingFile);

  std::string request;
  auto* expand = app.add_subcommand("expand", "Add one grid block from a free-form request");
  expand->add_option("request", request, "Expansion request")->required();

  std::string bind = "127.0.0.1:8080", static_dir;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  serve->add_option("--bind", bind, "host:port")->capture_default_str();
  serve->add_option("--static", static_dir, "Directory served at /")->check(CLI::ExistingDirectory);

  std::string dir_a, dir_b, votes, json_out;
  int repeats = 2;
  auto* eval = app.add_subcommand("eval", "Pairwise judge comparison of two projects");
  eval->add_option("dirA", dir_a, "Project A")->required()->check(CLI::ExistingDirectory);
  eval->add_option("dirB", dir_b, "Project B")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--human-votes", votes, "CSV of comparison-id,dimension,vote")->check(CLI::ExistingFile);
  eval->add_option("--repeats", repeats, "Times each comparison is asked")->capture_default_str();
  eval->add_option("--json", json_out, "Also write the report as JSON");

  CLI11_PARSE(app, argc, argv);

  try {
    const EngineConfig cfg = load_engine_config(g);
    auto hub = make_hub(g, cfg);
    ProjectStore store(g.project);

    auto plan_request = [&] {
      PlanRequest req;
      req.prompt = prompt;
      if (!grid_size.empty()) req.forced_size = parse_grid_size(grid_size);
      if (!reference.empty()) req.reference_city = reference;
      return req;
    };

    if (*plan) {
      auto p = plan_city(store, *hub, cfg, plan_request(), stderr_progress());
      std::cout << p.layout.rows() << "x" << p.layout.cols() << " grid, " << p.layout.districts().size()
                << " district(s), " << p.descriptions.size() << " tile description(s)\n";
    } else if (*run) {
      auto p = run_pipeline(store, *hub, cfg, plan_request(), stderr_progress());
      std::cout << "assembled " << p.layout.tile_indices().size() << " tile(s) into "
                << store.path_of("scene.manifest.json").string() << "\n";
    } else if (*generate) {
      auto p = generate_tiles(store, *hub, cfg, stderr_progress());
      std::cout << p.layout.tile_indices().size() << " tile(s) done\n";
    } else if (*assemble_cmd) {
      std::optional<StyleConfig> style;
      if (!style_file.empty()) {
        std::ifstream in(style_file);
        style = style_from_json(nlohmann::json::parse(in), cfg.style);
      }
      std::optional<RoadConnections> roads;
      if (!roads_file.empty()) roads = load_roads(roads_file);
      auto m = assemble_city(store, cfg, style, roads);
      std::cout << m.placements.size() << " placement(s), " << m.roads.size() << " road segment(s)\n";
    } else if (*expand) {
      auto out = expand_city(store, *hub, cfg, request, stderr_progress());
      const auto& r = out.record;
      std::cout << "placed '" << r.scene_graph.new_block_name << "' as tile " << r.tile_index << " at "
                << to_string(r.chosen) << " (translation " << to_string(r.translation) << ")\n";
      for (const auto& b : r.candidates)
        std::printf("  %-10s L_dist=%+.5f L_sem=%+.5f L=%+.5f%s\n", to_string(b.candidate).c_str(), b.l_dist, b.l_sem,
                    b.total, b.candidate == r.chosen ? "  *" : "");
    } else if (*serve) {
      auto [host, port] = parse_bind_address(bind);
      g_service = std::make_unique<Service>(g.project, cfg, hub,
                                            static_dir.empty() ? std::nullopt : std::optional<std::filesystem::path>(static_dir));
      std::signal(SIGINT, [](int) {
        if (g_service) g_service->stop();
      });
      std::cerr << "serving " << g.project << " on " << host << ":" << port << "\n";
      g_service->run(host, port);
      g_service.reset();
    } else if (*eval) {
      EvalOptions opts;
      opts.repeats = repeats;
      if (!votes.empty()) opts.human_votes = votes;
      auto report = run_eval(ProjectStore(dir_a), ProjectStore(dir_b), *hub, opts);
      std::cout << report_table(report);
      if (!json_out.empty()) {
        std::ofstream out(json_out);
        out << report_to_json(report).dump(2) << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
