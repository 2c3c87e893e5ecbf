#include "gridcity/service/pipeline.hpp"
#include "gridcity/mock_providers.hpp"

#include <atomic>
#include <map>
#include <mutex>
#include <thread>

namespace gridcity {

namespace {

void report(const PipelineObserver& obs, const std::string& stage, double p) {
  if (obs.on_progress) obs.on_progress(stage, p);
}

std::mutex& expansion_mutex(const std::filesystem::path& root) {
  static std::mutex guard;
  static std::map<std::string, std::unique_ptr<std::mutex>> locks;
  std::lock_guard lock(guard);
  auto key = std::filesystem::weakly_canonical(root).string();
  auto& m = locks[key];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

std::string project_id(const std::string& prompt) { return "city-" + hex64(fnv1a64(prompt)).substr(0, 12); }

}  // namespace

void check_plan_request(const ProjectStore& store, const PlanRequest& request) {
  if (request.prompt.find_first_not_of(" \t\r\n") == std::string::npos) throw Error("city prompt must not be empty");
  if (store.has_city()) {
    const CityProject existing = store.load();
    if (existing.prompt != request.prompt)
      throw ConflictError("project already holds a city planned from a different prompt");
    if (request.forced_size && existing.initial_layout.extent() != *request.forced_size)
      throw ConflictError("project already holds a city of a different grid size");
  }
}

CityProject plan_city(ProjectStore& store, ModelHub& hub, const EngineConfig& cfg, const PlanRequest& request,
                      const PipelineObserver& observer) {
  check_plan_request(store, request);
  CityProject project;
  if (store.has_city()) {
    project = store.load();
  } else {
    report(observer, "plan", 0.0);
    try {
      std::optional<ReferenceSummary> summary;
      if (request.reference_city) {
        auto corpus = store.exists("corpus.jsonl") ? load_corpus(store.corpus_path()) : std::vector<CorpusDoc>{};
        summary = retrieve_reference_summary(hub, corpus, *request.reference_city, cfg.planner.retrieval_k,
                                             cfg.planner.summary_max_chars);
      }
      auto outcome = global_plan(hub, request, summary, cfg.planner);
      project.id = project_id(request.prompt);
      project.prompt = request.prompt;
      project.layout = project.initial_layout = outcome.layout;
      for (int t : project.layout.tile_indices()) project.assets[t] = TileAsset{};
    } catch (const std::exception& e) {
      throw StageError("plan", e.what());
    }
    store.save(project);
    report(observer, "plan", 1.0);
  }
  if (!store.has_descriptions() || project.descriptions.size() != project.layout.tile_indices().size()) {
    report(observer, "design", 0.0);
    try {
      project.descriptions = design_city(hub, project.layout, project.prompt, cfg.planner);
    } catch (const std::exception& e) {
      throw StageError("design", e.what());
    }
    store.save(project);
    report(observer, "design", 1.0);
  }
  return project;
}

CityProject generate_tiles(ProjectStore& store, ModelHub& hub, const EngineConfig& cfg,
                           const PipelineObserver& observer) {
  CityProject project = store.load();
  std::vector<int> pending;
  for (int t : project.layout.tile_indices())
    if (!store.tile_complete(project, t)) pending.push_back(t);
  for (int t : pending)
    if (!project.descriptions.contains(t)) throw StageError("generate", "tile " + std::to_string(t) + " has no description");

  std::mutex mutex;
  std::atomic<std::size_t> next{0};
  std::size_t finished = 0;
  report(observer, "generate", pending.empty() ? 1.0 : 0.0);
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next++;
      if (i >= pending.size()) return;
      const int index = pending[i];
      if (observer.on_tile_start) observer.on_tile_start(index);
      TileJob job;
      job.index = index;
      job.description = project.descriptions.at(index).text;
      job = run_loop(hub, std::move(job), project.prompt, cfg.loop,
                     [&store](const TileJob& j, const IterationRecord& rec) { store.save_iteration(j.index, rec); });
      TileAsset asset;
      try {
        asset = store.save_tile_result(job);
      } catch (const std::exception& e) {
        asset.status = TileStatus::kFailed;
        asset.error = e.what();
      }
      {
        std::lock_guard lock(mutex);
        project.assets[index] = asset;
        store.save(project);
        ++finished;
        report(observer, "generate", static_cast<double>(finished) / static_cast<double>(pending.size()));
      }
      if (observer.on_tile_end) observer.on_tile_end(index, asset);
    }
  };
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, cfg.tile_workers)), pending.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < n; ++i) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  std::vector<std::string> failed;
  for (int t : pending)
    if (project.assets[t].status != TileStatus::kDone)
      failed.push_back(std::to_string(t) + " (" + project.assets[t].error + ")");
  if (!failed.empty()) {
    std::string msg = "tile(s) failed:";
    for (const auto& f : failed) msg += " " + f;
    throw StageError("generate", msg);
  }
  return project;
}

SceneManifest assemble_city(ProjectStore& store, const EngineConfig& cfg, const std::optional<StyleConfig>& style,
                            const std::optional<RoadConnections>& connections) {
  CityProject project = store.load();
  try {
    SceneManifest m = assemble(project, style.value_or(cfg.style), cfg.assembly, connections);
    store.save_manifest(m);
    return m;
  } catch (const std::exception& e) {
    throw StageError("assemble", e.what());
  }
}

CityProject run_pipeline(ProjectStore& store, ModelHub& hub, const EngineConfig& cfg, const PlanRequest& request,
                         const PipelineObserver& observer) {
  plan_city(store, hub, cfg, request, observer);
  generate_tiles(store, hub, cfg, observer);
  report(observer, "assemble", 0.0);
  assemble_city(store, cfg);
  report(observer, "assemble", 1.0);
  return store.load();
}

Image render_board(const ProjectStore& store, const CityProject& project, int cell_px) {
  const GridSize ext = project.layout.extent();
  Raster board(ext.cols * cell_px, ext.rows * cell_px);
  for (const auto& [cell, idx] : project.layout.tiles()) {
    Raster tile(1, 1, {128, 128, 128, 255});
    auto it = project.assets.find(idx);
    if (it != project.assets.end() && it->second.status == TileStatus::kDone) {
      if (auto bytes = store.read_bytes(it->second.image_path)) tile = decode_png(Image{*bytes});
    }
    blit_scaled(board, tile, cell.col * cell_px, cell.row * cell_px, cell_px);
  }
  return encode_png(board);
}

ExpansionResult expand_city(ProjectStore& store, ModelHub& hub, const EngineConfig& cfg, const std::string& request,
                            const PipelineObserver& observer) {
  std::lock_guard serial(expansion_mutex(store.root()));
  if (request.find_first_not_of(" \t\r\n") == std::string::npos) throw Error("expansion request must not be empty");
  if (!store.has_manifest()) throw ConflictError("project must be assembled before it can be expanded");
  CityProject project = store.load();

  report(observer, "expand", 0.0);
  const Image board = render_board(store, project);
  SceneGraph graph = infer_expansion(hub, board, project.layout, project.descriptions, request, cfg.planner.retries);
  Selection sel = select_location(project.layout, project.descriptions, graph, cfg.expansion, hub);
  report(observer, "expand", 0.3);

  CityProject next = apply_expansion(project, graph, sel.chosen, request, sel.breakdowns);
  const ExpansionRecord record = next.history.back();
  store.save(next);
  store.append_history(record);

  next = generate_tiles(store, hub, cfg, observer);
  report(observer, "expand", 0.9);
  assemble_city(store, cfg);
  report(observer, "expand", 1.0);
  return {store.load(), record};
}

}  // namespace gridcity
