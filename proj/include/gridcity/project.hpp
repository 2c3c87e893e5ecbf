#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridcity/core.hpp"
#include "gridcity/expansion.hpp"
#include "gridcity/genloop.hpp"
#include "gridcity/mesh.hpp"

namespace gridcity {

/// Where a tile's generated artifacts live, relative to the project root.
struct TileAsset {
  TileStatus status = TileStatus::kPending;
  std::string image_path;
  std::string mesh_path;
  BoundingBox bbox;
  int iterations = 0;
  int final_iteration = 0;
  bool below_threshold = false;
  std::string error;

  bool operator==(const TileAsset&) const = default;
};

inline std::string tile_dir(int index) { return "tiles/" + std::to_string(index); }

/// One applied expansion. `chosen` is in the coordinates of the layout before
/// the expansion; `translation` is the shift applied to every cell afterwards.
struct ExpansionRecord {
  std::string request;
  SceneGraph scene_graph;
  std::vector<ObjectiveBreakdown> candidates;
  GridCoord chosen;
  GridCoord translation;
  std::string district_id;
  int tile_index = 0;
};

struct CityProject {
  std::string id;
  std::string prompt;
  CityLayout initial_layout;
  CityLayout layout;
  DescriptionMap descriptions;
  std::map<int, TileAsset> assets;
  std::vector<ExpansionRecord> history;
};

/// Adds the new single-cell district at `chosen`, re-origins coordinates,
/// records d_new as the tile's description, queues a pending tile job and
/// appends the history record.
inline CityProject apply_expansion(const CityProject& project, const SceneGraph& graph, GridCoord chosen,
                                   const std::string& request = {},
                                   std::vector<ObjectiveBreakdown> candidates = {}) {
  if (project.layout.occupied(chosen)) throw OccupiedError("expansion target " + to_string(chosen) + " is occupied");
  std::set<std::string> taken;
  for (const auto& [id, d] : project.layout.districts()) taken.insert(id);
  DistrictBlueprint district;
  district.name = graph.new_block_name.empty() ? std::string("Expansion") : graph.new_block_name;
  district.id = unique_district_id(district.name, taken);
  district.description = graph.new_description;
  const int tile = project.layout.next_tile_index();

  CityProject next = project;
  auto expanded = project.layout.with_cell(chosen, district, tile);
  next.layout = std::move(expanded.layout);
  next.descriptions[tile] = GridDescription{tile, graph.new_description};
  next.assets[tile] = TileAsset{};
  next.history.push_back(
      {request, graph, std::move(candidates), chosen, expanded.translation, district.id, tile});
  return next;
}

inline CityLayout replay_step(const CityLayout& layout, const ExpansionRecord& rec) {
  DistrictBlueprint district{rec.district_id,
                             rec.scene_graph.new_block_name.empty() ? std::string("Expansion") : rec.scene_graph.new_block_name,
                             rec.scene_graph.new_description,
                             {}};
  auto expanded = layout.with_cell(rec.chosen, std::move(district), rec.tile_index);
  if (expanded.translation != rec.translation) throw Error("history record translation does not match replay");
  return std::move(expanded.layout);
}

/// Applies every history record, in order, to `initial`.
inline CityLayout replay_history(const CityLayout& initial, const std::vector<ExpansionRecord>& history) {
  CityLayout layout = initial;
  for (const auto& rec : history) layout = replay_step(layout, rec);
  return layout;
}

inline nlohmann::json expansion_record_to_json(const ExpansionRecord& r) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& b : r.candidates) cands.push_back(breakdown_to_json(b));
  return {{"request", r.request},
          {"scene_graph", scene_graph_to_json(r.scene_graph)},
          {"candidates", cands},
          {"chosen", coord_to_json(r.chosen)},
          {"translation", coord_to_json(r.translation)},
          {"district_id", r.district_id},
          {"tile_index", r.tile_index}};
}

inline ExpansionRecord expansion_record_from_json(const nlohmann::json& j) {
  try {
    ExpansionRecord r;
    r.request = j.at("request").get<std::string>();
    r.scene_graph = scene_graph_from_json(j.at("scene_graph"));
    for (const auto& c : j.at("candidates")) r.candidates.push_back(breakdown_from_json(c));
    r.chosen = coord_from_json(j.at("chosen"));
    r.translation = coord_from_json(j.at("translation"));
    r.district_id = j.at("district_id").get<std::string>();
    r.tile_index = j.at("tile_index").get<int>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed expansion record: ") + e.what());
  }
}

}  // namespace gridcity
