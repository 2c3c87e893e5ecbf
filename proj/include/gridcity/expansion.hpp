#pragma once

// Relationship-guided expansion: scene-graph inference, frontier candidates
// and the distance + semantic placement objective.
//
//   L(x) = sum_g w(r(g)) * |x - g|  -  lambda * sum_{y in N4(x)} cos(e_new, e_y)
//
// minimised over the frontier of the occupied region.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridcity/config.hpp"
#include "gridcity/core.hpp"
#include "gridcity/json_util.hpp"
#include "gridcity/providers.hpp"

namespace gridcity {

/// Star graph centred on the new grid. Districts without an edge have no
/// special constraint.
struct SceneGraph {
  std::string new_block_name;
  std::string new_description;
  std::map<std::string, Relation> edges;  // district id -> relation

  Relation relation_of(const std::string& district_id) const {
    auto it = edges.find(district_id);
    return it == edges.end() ? Relation::kNoSpecialConstraint : it->second;
  }

  bool operator==(const SceneGraph&) const = default;
};

/// Unoccupied cells 4-adjacent to the occupied region, sorted by (row, col).
using CandidateSet = std::vector<GridCoord>;

struct ObjectiveBreakdown {
  GridCoord candidate;
  double l_dist = 0.0;
  double l_sem = 0.0;
  double total = 0.0;
};

inline constexpr std::array<GridCoord, 4> kNeighbourOffsets = {GridCoord{-1, 0}, GridCoord{1, 0}, GridCoord{0, -1},
                                                               GridCoord{0, 1}};

/// Breadth-first search from every occupied cell; the cells reached at depth 1
/// that are empty form the frontier. Coordinates may be negative: the plane is
/// unbounded unless `bounds` confines candidates to [0, rows) x [0, cols).
inline CandidateSet enumerate_candidates(const CityLayout& layout, std::optional<GridSize> bounds = std::nullopt) {
  const bool bounded = bounds.has_value();
  const GridSize box = bounds.value_or(GridSize{0, 0});
  std::set<GridCoord> frontier;
  std::set<GridCoord> visited;
  std::queue<std::pair<GridCoord, int>> queue;
  for (const auto& [c, id] : layout.cells()) {
    queue.emplace(c, 0);
    visited.insert(c);
  }
  while (!queue.empty()) {
    auto [c, depth] = queue.front();
    queue.pop();
    if (depth >= 1) continue;
    for (GridCoord d : kNeighbourOffsets) {
      GridCoord n{c.row + d.row, c.col + d.col};
      if (!visited.insert(n).second) continue;
      if (!layout.occupied(n)) {
        if (bounded && (n.row < 0 || n.col < 0 || n.row >= box.rows || n.col >= box.cols)) continue;
        frontier.insert(n);
        queue.emplace(n, depth + 1);
      }
    }
  }
  return {frontier.begin(), frontier.end()};
}

inline double cell_distance(GridCoord a, GridCoord b) {
  return std::hypot(static_cast<double>(a.row - b.row), static_cast<double>(a.col - b.col));
}

/// Weighted sum of centre-to-centre distances from `x` to every occupied
/// cell, each weighted by its district's relation to the new grid.
inline double distance_term(GridCoord x, const CityLayout& layout, const SceneGraph& graph,
                            const RelationWeights& weights = {}, bool normalize_by_district_size = false) {
  if (layout.occupied(x)) throw OccupiedError("candidate " + to_string(x) + " is occupied");
  std::map<std::string, double> cells_per_district;
  if (normalize_by_district_size)
    for (const auto& [c, id] : layout.cells()) cells_per_district[id] += 1.0;
  double sum = 0.0;
  for (const auto& [g, id] : layout.cells()) {
    const double w = weights[graph.relation_of(id)];
    if (w == 0.0) continue;
    double term = w * cell_distance(x, g);
    if (normalize_by_district_size) term /= cells_per_district[id];
    sum += term;
  }
  return sum;
}

/// Negated sum of cosine similarities between the new grid's description and
/// the descriptions of the occupied 4-neighbours of `x`. `embed` maps text to
/// an EmbeddingVector.
template <class Embed>
double semantic_term(GridCoord x, const std::string& new_description, const CityLayout& layout,
                     const DescriptionMap& descriptions, Embed&& embed) {
  if (layout.occupied(x)) throw OccupiedError("candidate " + to_string(x) + " is occupied");
  const EmbeddingVector e_new = embed(new_description);
  double sum = 0.0;
  for (GridCoord d : kNeighbourOffsets) {
    auto tile = layout.tile_at({x.row + d.row, x.col + d.col});
    if (!tile) continue;
    auto it = descriptions.find(*tile);
    if (it == descriptions.end()) throw Error("tile " + std::to_string(*tile) + " has no description");
    sum += cosine(e_new, embed(it->second.text));
  }
  return -sum;
}

inline double semantic_term(GridCoord x, const std::string& new_description, const CityLayout& layout,
                            const DescriptionMap& descriptions, ModelHub& hub) {
  return semantic_term(x, new_description, layout, descriptions,
                       [&hub](const std::string& t) { return hub.embed(t); });
}

struct Selection {
  GridCoord chosen;
  std::vector<ObjectiveBreakdown> breakdowns;  // one per candidate, (row, col) order
};

/// Evaluates the objective on each of `candidates` and returns the minimiser.
/// Totals within `tie_tolerance` of the best count as ties and go to the
/// smallest (row, col).
template <class Embed>
Selection select_among(CandidateSet candidates, const CityLayout& layout, const DescriptionMap& descriptions,
                       const SceneGraph& graph, const ExpansionConfig& cfg, Embed&& embed) {
  if (candidates.empty()) throw NoCandidateError("no frontier cell is available for expansion");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  Selection sel;
  sel.breakdowns.reserve(candidates.size());
  for (GridCoord x : candidates) {
    ObjectiveBreakdown b;
    b.candidate = x;
    b.l_dist = distance_term(x, layout, graph, cfg.weights, cfg.normalize_by_district_size);
    b.l_sem = semantic_term(x, graph.new_description, layout, descriptions, embed);
    b.total = b.l_dist + cfg.lambda * b.l_sem;
    sel.breakdowns.push_back(b);
  }
  const ObjectiveBreakdown* best = &sel.breakdowns.front();
  for (const auto& b : sel.breakdowns)
    if (b.total < best->total - cfg.tie_tolerance) best = &b;
  sel.chosen = best->candidate;
  return sel;
}

/// Minimiser of the objective over the frontier (confined to the current
/// extent when cfg.restrict_to_extent is set).
template <class Embed>
Selection select_location(const CityLayout& layout, const DescriptionMap& descriptions, const SceneGraph& graph,
                          const ExpansionConfig& cfg, Embed&& embed) {
  CandidateSet candidates =
      cfg.restrict_to_extent ? enumerate_candidates(layout, layout.extent()) : enumerate_candidates(layout);
  return select_among(std::move(candidates), layout, descriptions, graph, cfg, std::forward<Embed>(embed));
}

inline Selection select_location(const CityLayout& layout, const DescriptionMap& descriptions,
                                 const SceneGraph& graph, const ExpansionConfig& cfg, ModelHub& hub) {
  return select_location(layout, descriptions, graph, cfg, [&hub](const std::string& t) { return hub.embed(t); });
}

/// "- <name>: <description>" per district, as sent to the expansion model.
inline std::string city_overview(const CityLayout& layout, const DescriptionMap& descriptions = {}) {
  std::string out;
  for (const auto& [id, d] : layout.districts()) {
    out += "- " + d.name + " (" + std::to_string(layout.cells_of(id).size()) + " grid";
    out += layout.cells_of(id).size() == 1 ? ")" : "s)";
    std::string desc = d.description;
    if (desc.empty()) {
      for (const auto& c : layout.cells_of(id))
        if (auto it = descriptions.find(*layout.tile_at(c)); it != descriptions.end()) {
          desc = it->second.text;
          break;
        }
    }
    if (!desc.empty()) out += ": " + desc;
    out += "\n";
  }
  return out;
}

namespace detail {

inline std::string fold_name(const std::string& s) {
  std::string out;
  for (unsigned char ch : s)
    if (std::isalnum(ch)) out.push_back(static_cast<char>(std::tolower(ch)));
  return out;
}

}  // namespace detail

/// Maps an expansion reply onto the layout's districts. Zone names match a
/// district's name or id, ignoring case and punctuation.
inline SceneGraph parse_expansion_reply(std::string_view reply, const CityLayout& layout) {
  auto doc = extract_json(reply);
  if (!doc.is_object()) throw ParseError("expansion reply is not a JSON object");
  SceneGraph g;
  if (!doc.contains("block_name") || !doc["block_name"].is_string()) throw ParseError("expansion reply lacks block_name");
  if (!doc.contains("block_description") || !doc["block_description"].is_string())
    throw ParseError("expansion reply lacks block_description");
  g.new_block_name = doc["block_name"].get<std::string>();
  g.new_description = doc["block_description"].get<std::string>();
  if (g.new_description.empty()) throw ParseError("expansion reply has an empty block_description");
  if (doc.contains("spatial_relations")) {
    const auto& rel = doc["spatial_relations"];
    if (!rel.is_object()) throw ParseError("spatial_relations is not an object");
    for (auto it = rel.begin(); it != rel.end(); ++it) {
      const std::string key = detail::fold_name(it.key());
      std::string match;
      for (const auto& [id, d] : layout.districts())
        if (detail::fold_name(d.name) == key || detail::fold_name(id) == key) {
          match = id;
          break;
        }
      if (match.empty()) throw ExpansionInferenceError("expansion reply names unknown district '" + it.key() + "'");
      if (!it.value().is_string()) throw ParseError("relation for '" + it.key() + "' is not a string");
      g.edges[match] = parse_relation(it.value().get<std::string>());
    }
  }
  return g;
}

/// One vision-chat call per attempt with the city render and overview.
/// Unparsable replies and unknown districts are retried, then raised as
/// ExpansionInferenceError.
inline SceneGraph infer_expansion(ModelHub& hub, const Image& city_render, const CityLayout& layout,
                                  const DescriptionMap& descriptions, const std::string& user_request, int retries = 2) {
  if (layout.districts().empty()) throw ExpansionInferenceError("city has no districts to relate to");
  nlohmann::json names = nlohmann::json::array();
  for (const auto& [id, d] : layout.districts()) names.push_back(d.name);
  const Variables vars = {{"city_overview", city_overview(layout, descriptions)},
                          {"expansion_preference", user_request},
                          {"zone_names", names.dump()}};
  std::string last_error;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    std::vector<Image> images;
    if (!city_render.empty()) images.push_back(city_render);
    const std::string reply = hub.chat(tmpl::kExpansion, vars, std::move(images));
    try {
      return parse_expansion_reply(reply, layout);
    } catch (const Error& e) {
      last_error = e.what();
    }
  }
  throw ExpansionInferenceError("expansion inference failed after " + std::to_string(retries + 1) +
                                " attempt(s): " + last_error);
}

// JSON forms shared by the history file and the HTTP API.

inline nlohmann::json coord_to_json(GridCoord c) { return {{"row", c.row}, {"col", c.col}}; }

inline GridCoord coord_from_json(const nlohmann::json& j) { return {j.at("row").get<int>(), j.at("col").get<int>()}; }

inline nlohmann::json scene_graph_to_json(const SceneGraph& g) {
  nlohmann::json rel = nlohmann::json::object();
  for (const auto& [id, r] : g.edges) rel[id] = relation_token(r);
  return {{"block_name", g.new_block_name}, {"block_description", g.new_description}, {"spatial_relations", rel}};
}

inline SceneGraph scene_graph_from_json(const nlohmann::json& j) {
  SceneGraph g;
  g.new_block_name = j.at("block_name").get<std::string>();
  g.new_description = j.at("block_description").get<std::string>();
  for (auto it = j.at("spatial_relations").begin(); it != j.at("spatial_relations").end(); ++it)
    g.edges[it.key()] = parse_relation(it.value().get<std::string>());
  return g;
}

inline nlohmann::json breakdown_to_json(const ObjectiveBreakdown& b) {
  return {{"candidate", coord_to_json(b.candidate)}, {"l_dist", b.l_dist}, {"l_sem", b.l_sem}, {"total", b.total}};
}

inline ObjectiveBreakdown breakdown_from_json(const nlohmann::json& j) {
  return {coord_from_json(j.at("candidate")), j.at("l_dist").get<double>(), j.at("l_sem").get<double>(),
          j.at("total").get<double>()};
}

}  // namespace gridcity
