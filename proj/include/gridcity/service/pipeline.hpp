#pragma once

#include <functional>
#include <optional>
#include <string>

#include "gridcity/config.hpp"
#include "gridcity/service/project_store.hpp"

namespace gridcity {

/// A pipeline failure tagged with the stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// The request cannot run against the project's current state.
class ConflictError : public Error {
 public:
  using Error::Error;
};

/// Progress hooks. All optional; tile hooks may be called from worker threads.
struct PipelineObserver {
  std::function<void(const std::string& stage, double progress)> on_progress;
  std::function<void(int index)> on_tile_start;
  std::function<void(int index, const TileAsset&)> on_tile_end;
};

/// A store takes one city. Planning again with the same prompt resumes it;
/// a different prompt is a ConflictError.
void check_plan_request(const ProjectStore& store, const PlanRequest& request);

/// Global plan plus local design; persists city.json and descriptions.json.
/// Skips whichever part is already on disk.
CityProject plan_city(ProjectStore& store, ModelHub& hub, const EngineConfig& cfg, const PlanRequest& request,
                      const PipelineObserver& observer = {});

/// Runs the image loop for every occupied tile that is not complete, at most
/// cfg.tile_workers at a time. Throws StageError("generate") if any tile failed.
CityProject generate_tiles(ProjectStore& store, ModelHub& hub, const EngineConfig& cfg,
                           const PipelineObserver& observer = {});

/// Writes scene.manifest.json and scene.gltf.
SceneManifest assemble_city(ProjectStore& store, const EngineConfig& cfg,
                            const std::optional<StyleConfig>& style = std::nullopt,
                            const std::optional<RoadConnections>& connections = std::nullopt);

/// plan -> design -> generate -> assemble, resuming from whatever the store
/// already holds.
CityProject run_pipeline(ProjectStore& store, ModelHub& hub, const EngineConfig& cfg, const PlanRequest& request,
                         const PipelineObserver& observer = {});

/// Top-down board of the tiles' final images; empty or unfinished cells are grey.
Image render_board(const ProjectStore& store, const CityProject& project, int cell_px = 64);

struct ExpansionResult {
  CityProject project;
  ExpansionRecord record;
};

/// Infers the new block's scene graph, picks its cell, applies it, generates
/// the new tile and re-assembles. Calls on the same store run one at a time.
/// Inference and selection errors leave the store untouched.
ExpansionResult expand_city(ProjectStore& store, ModelHub& hub, const EngineConfig& cfg, const std::string& request,
                            const PipelineObserver& observer = {});

}  // namespace gridcity
