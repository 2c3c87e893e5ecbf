#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gridcity/assembly.hpp"
#include "gridcity/genloop.hpp"
#include "gridcity/image.hpp"
#include "gridcity/planner.hpp"
#include "gridcity/project.hpp"

namespace gridcity {

/// On-disk project directory.
///
///   city.json             layout, initial layout, tile assets
///   descriptions.json     tile index -> description
///   tiles/<i>/iter<k>/    produced.png, refined.png, verdict.json
///   tiles/<i>/final.png, tiles/<i>/model.glb
///   scene.manifest.json, scene.gltf
///   history.jsonl         one expansion record per line
///   corpus.jsonl          optional reference corpus
///
/// Every write goes to a temp file that is renamed into place.
class ProjectStore {
 public:
  explicit ProjectStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path path_of(const std::string& rel) const { return root_ / rel; }
  bool exists(const std::string& rel) const;

  bool has_city() const { return exists("city.json"); }
  bool has_descriptions() const { return exists("descriptions.json"); }
  bool has_manifest() const { return exists("scene.manifest.json"); }

  CityProject load() const;
  /// city.json and descriptions.json (history is appended separately).
  void save(const CityProject& project);

  void append_history(const ExpansionRecord& record);
  std::vector<ExpansionRecord> load_history() const;

  void save_iteration(int index, const IterationRecord& rec);
  /// Writes final.png and model.glb for a finished job and returns the asset
  /// entry to record in city.json.
  TileAsset save_tile_result(const TileJob& job);
  /// A done tile whose image and mesh are on disk.
  bool tile_complete(const CityProject& project, int index) const;

  void save_manifest(const SceneManifest& manifest);
  std::optional<std::string> manifest_text() const;

  void write_bytes(const std::string& rel, const Bytes& data);
  void write_text(const std::string& rel, const std::string& text);
  std::optional<Bytes> read_bytes(const std::string& rel) const;

  std::filesystem::path corpus_path() const { return path_of("corpus.jsonl"); }

 private:
  std::filesystem::path root_;
  mutable std::mutex mutex_;
};

nlohmann::json tile_asset_to_json(const TileAsset& a);
TileAsset tile_asset_from_json(const nlohmann::json& j);

}  // namespace gridcity
