#pragma once

// Scene assembly: per-tile transforms, ground, roads and materials, emitted
// as a manifest.

#include <algorithm>
#include <array>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gridcity/config.hpp"
#include "gridcity/core.hpp"
#include "gridcity/json_util.hpp"
#include "gridcity/mesh.hpp"
#include "gridcity/project.hpp"

namespace gridcity {

inline constexpr const char* kManifestVersion = "gridcity.scene/1";

struct Vec3 {
  double x = 0, y = 0, z = 0;
  bool operator==(const Vec3&) const = default;
};

struct TilePlacement {
  int index = 0;
  GridCoord cell;
  std::string asset;  // relative mesh path
  BoundingBox bbox;
  Vec3 translation;
  double uniform_scale = 1.0;
  double rotation_z = 0.0;  // degrees
};

struct RoadSegment {
  int from_index = 0;
  int to_index = 0;
  GridCoord from_cell;
  GridCoord to_cell;
  double width = 0.0;
  std::array<double, 2> start{};  // world x, y
  std::array<double, 2> end{};
  Material material;
};

struct SceneManifest {
  double tile_size = 1.0;
  double fill_ratio = 0.95;
  GridSize extent;
  std::vector<TilePlacement> placements;
  std::array<double, 4> ground_extent{};  // min_x, min_y, max_x, max_y
  Material ground_material;
  std::vector<RoadSegment> roads;
  StyleConfig style;
};

/// World position of a cell centre; x grows with the column, y with the row.
inline Vec3 cell_center(GridCoord cell, double tile_size) {
  return {(cell.col + 0.5) * tile_size, (cell.row + 0.5) * tile_size, 0.0};
}

/// Uniform scale that fits the mesh's larger horizontal extent into
/// tile_size * fill_ratio, with the footprint centred on the cell at z = 0.
inline TilePlacement compute_transform(GridCoord cell, const BoundingBox& bbox, const AssemblyConfig& cfg = {}) {
  if (!(bbox.dx > 0 && bbox.dy > 0 && bbox.dz > 0)) throw GeometryError("bounding box extents must be positive");
  TilePlacement p;
  p.cell = cell;
  p.bbox = bbox;
  p.uniform_scale = cfg.tile_size * cfg.fill_ratio / std::max(bbox.dx, bbox.dy);
  p.translation = cell_center(cell, cfg.tile_size);
  return p;
}

using RoadConnections = std::vector<std::pair<int, int>>;  // tile index pairs

namespace detail {

inline RoadSegment make_road(const CityLayout& layout, GridCoord a, GridCoord b, const AssemblyConfig& cfg,
                             const Material& material) {
  if (b < a) std::swap(a, b);
  const double t = cfg.tile_size;
  RoadSegment s;
  s.from_cell = a;
  s.to_cell = b;
  s.from_index = *layout.tile_at(a);
  s.to_index = *layout.tile_at(b);
  s.width = cfg.road_width_ratio * t;
  s.material = material;
  if (a.row == b.row) {  // side by side: vertical gutter between columns
    const double x = (a.col + 1) * t;
    s.start = {x, a.row * t};
    s.end = {x, (a.row + 1) * t};
  } else {  // stacked: horizontal gutter between rows
    const double y = (a.row + 1) * t;
    s.start = {a.col * t, y};
    s.end = {(a.col + 1) * t, y};
  }
  return s;
}

}  // namespace detail

/// By default one segment in the gutter between every pair of 4-adjacent
/// occupied cells; with explicit connections, exactly those pairs.
inline std::vector<RoadSegment> build_roads(const CityLayout& layout, const std::optional<RoadConnections>& connections,
                                            const AssemblyConfig& cfg = {}, const Material& material = StyleConfig{}.road) {
  std::vector<RoadSegment> roads;
  if (!connections) {
    for (const auto& [c, id] : layout.cells()) {
      for (GridCoord n : {GridCoord{c.row, c.col + 1}, GridCoord{c.row + 1, c.col}})
        if (layout.occupied(n)) roads.push_back(detail::make_road(layout, c, n, cfg, material));
    }
    return roads;
  }
  std::set<std::pair<GridCoord, GridCoord>> seen;
  for (auto [i, j] : *connections) {
    auto a = layout.coord_of_tile(i), b = layout.coord_of_tile(j);
    if (!a || !b) throw RoadError("road connection (" + std::to_string(i) + ", " + std::to_string(j) + ") names a missing tile");
    if (std::abs(a->row - b->row) + std::abs(a->col - b->col) != 1)
      throw RoadError("tiles " + std::to_string(i) + " and " + std::to_string(j) + " are not 4-adjacent");
    auto key = *a < *b ? std::pair{*a, *b} : std::pair{*b, *a};
    if (!seen.insert(key).second) continue;
    roads.push_back(detail::make_road(layout, key.first, key.second, cfg, material));
  }
  return roads;
}

/// Every occupied tile must be done with a mesh on record.
inline SceneManifest assemble(const CityProject& project, const StyleConfig& style = {}, const AssemblyConfig& cfg = {},
                              const std::optional<RoadConnections>& connections = std::nullopt) {
  style.road.validate("road material");
  style.ground.validate("ground material");
  std::vector<int> missing;
  for (int idx : project.layout.tile_indices()) {
    auto it = project.assets.find(idx);
    if (it == project.assets.end() || it->second.status != TileStatus::kDone || it->second.mesh_path.empty())
      missing.push_back(idx);
  }
  if (!missing.empty()) throw IncompleteCityError(std::move(missing));

  SceneManifest m;
  m.tile_size = cfg.tile_size;
  m.fill_ratio = cfg.fill_ratio;
  m.extent = project.layout.extent();
  m.style = style;
  m.ground_material = style.ground;
  m.ground_extent = {0.0, 0.0, m.extent.cols * cfg.tile_size, m.extent.rows * cfg.tile_size};
  for (const auto& [cell, idx] : project.layout.tiles()) {
    const TileAsset& asset = project.assets.at(idx);
    TilePlacement p = compute_transform(cell, asset.bbox, cfg);
    p.index = idx;
    p.asset = asset.mesh_path;
    m.placements.push_back(std::move(p));
  }
  std::sort(m.placements.begin(), m.placements.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  m.roads = build_roads(project.layout, connections, cfg, style.road);
  return m;
}

inline nlohmann::json manifest_to_json(const SceneManifest& m) {
  nlohmann::json placements = nlohmann::json::array();
  for (const auto& p : m.placements) {
    placements.push_back({{"index", p.index},
                          {"cell", {{"row", p.cell.row}, {"col", p.cell.col}}},
                          {"asset", p.asset},
                          {"bbox", {p.bbox.dx, p.bbox.dy, p.bbox.dz}},
                          {"translation", {p.translation.x, p.translation.y, p.translation.z}},
                          {"uniform_scale", p.uniform_scale},
                          {"rotation_z", p.rotation_z}});
  }
  nlohmann::json roads = nlohmann::json::array();
  for (const auto& r : m.roads) {
    roads.push_back({{"from_index", r.from_index},
                     {"to_index", r.to_index},
                     {"from_cell", {{"row", r.from_cell.row}, {"col", r.from_cell.col}}},
                     {"to_cell", {{"row", r.to_cell.row}, {"col", r.to_cell.col}}},
                     {"width", r.width},
                     {"start", {r.start[0], r.start[1]}},
                     {"end", {r.end[0], r.end[1]}},
                     {"material", material_to_json(r.material)}});
  }
  return {{"version", kManifestVersion},
          {"tile_size", m.tile_size},
          {"fill_ratio", m.fill_ratio},
          {"extent", {{"rows", m.extent.rows}, {"cols", m.extent.cols}}},
          {"placements", placements},
          {"ground",
           {{"extent", {m.ground_extent[0], m.ground_extent[1], m.ground_extent[2], m.ground_extent[3]}},
            {"material", material_to_json(m.ground_material)}}},
          {"roads", roads},
          {"style", {{"road_material", material_to_json(m.style.road)}, {"ground_material", material_to_json(m.style.ground)}}}};
}

/// Byte-stable manifest text.
inline std::string manifest_text(const SceneManifest& m) { return canonical_dump(manifest_to_json(m)); }

/// glTF 2.0 document whose node tree mirrors the manifest: a Z-up root with
/// one child per placement (mesh path in `extras.asset`), a ground node and
/// one node per road segment. Geometry stays in the per-tile GLB files.
inline nlohmann::json export_gltf(const SceneManifest& m) {
  auto pbr = [](const Material& mat, const std::string& name) {
    return nlohmann::json{{"name", name},
                          {"pbrMetallicRoughness",
                           {{"baseColorFactor", {mat.rgba.c[0], mat.rgba.c[1], mat.rgba.c[2], mat.rgba.c[3]}},
                            {"metallicFactor", 0.0},
                            {"roughnessFactor", mat.roughness}}}};
  };
  nlohmann::json nodes = nlohmann::json::array();
  nlohmann::json children = nlohmann::json::array();
  // rotate Z-up into glTF's Y-up
  nodes.push_back({{"name", "city"}, {"rotation", {-0.7071067811865476, 0.0, 0.0, 0.7071067811865476}}});
  for (const auto& p : m.placements) {
    children.push_back(nodes.size());
    nodes.push_back({{"name", "tile-" + std::to_string(p.index)},
                     {"translation", {p.translation.x, p.translation.y, p.translation.z}},
                     {"scale", {p.uniform_scale, p.uniform_scale, p.uniform_scale}},
                     {"extras", {{"asset", p.asset}, {"index", p.index}}}});
  }
  children.push_back(nodes.size());
  nodes.push_back({{"name", "ground"},
                   {"extras",
                    {{"extent", {m.ground_extent[0], m.ground_extent[1], m.ground_extent[2], m.ground_extent[3]}},
                     {"material", 0}}}});
  for (const auto& r : m.roads) {
    children.push_back(nodes.size());
    nodes.push_back({{"name", "road-" + std::to_string(r.from_index) + "-" + std::to_string(r.to_index)},
                     {"extras", {{"start", {r.start[0], r.start[1]}}, {"end", {r.end[0], r.end[1]}}, {"width", r.width}, {"material", 1}}}});
  }
  nodes[0]["children"] = children;
  return {{"asset", {{"version", "2.0"}, {"generator", "gridcity"}}},
          {"scene", 0},
          {"scenes", {{{"nodes", {0}}}}},
          {"nodes", nodes},
          {"materials", {pbr(m.ground_material, "ground"), pbr(m.style.road, "road")}}};
}

}  // namespace gridcity
