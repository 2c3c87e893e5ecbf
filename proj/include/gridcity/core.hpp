#pragma once

// City / district / tile data model, row-major indexing and plan validation.

#include <algorithm>
#include <cctype>
#include <compare>
#include <map>
#include <optional>
#include <queue>
#include <regex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gridcity/errors.hpp"

namespace gridcity {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// Cell coordinate in tile units. Signed so that candidate cells outside the
/// current extent can be represented before re-origin.
struct GridCoord {
  int row = 0;
  int col = 0;

  auto operator<=>(const GridCoord&) const = default;
};

inline std::string to_string(GridCoord c) {
  return "(" + std::to_string(c.row) + ", " + std::to_string(c.col) + ")";
}

struct GridSize {
  int rows = 0;
  int cols = 0;
  bool operator==(const GridSize&) const = default;
};

/// 1-based row-major index of a cell.
inline int index_of(GridCoord coord, int cols) {
  if (cols < 1) throw IndexError("column count must be >= 1");
  if (coord.row < 0 || coord.col < 0 || coord.col >= cols)
    throw IndexError("cell " + to_string(coord) + " outside a grid with " + std::to_string(cols) +
                     " columns");
  return coord.row * cols + coord.col + 1;
}

inline GridCoord coord_of(int index, int cols) {
  if (cols < 1) throw IndexError("column count must be >= 1");
  if (index < 1) throw IndexError("grid index must be >= 1, got " + std::to_string(index));
  return {(index - 1) / cols, (index - 1) % cols};
}

/// Parses "R×C", "R x C" or "R X C" with arbitrary spacing.
inline GridSize parse_grid_size(const std::string& text) {
  static const std::regex pattern("^\\s*(\\d+)\\s*(?:x|X|\xC3\x97)\\s*(\\d+)\\s*$");
  std::smatch m;
  if (!std::regex_match(text, m, pattern)) throw ParseError("malformed grid size: '" + text + "'");
  GridSize size{std::stoi(m[1]), std::stoi(m[2])};
  if (size.rows < 1 || size.cols < 1) throw ParseError("grid size must be at least 1x1: '" + text + "'");
  return size;
}

inline std::string format_grid_size(GridSize s) {
  return std::to_string(s.rows) + "\xC3\x97" + std::to_string(s.cols);
}

/// Lowercase ASCII slug: runs of non-alphanumerics collapse to one '-'.
inline std::string slugify(const std::string& name) {
  std::string out;
  for (unsigned char ch : name) {
    if (std::isalnum(ch)) {
      out.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!out.empty() && out.back() != '-') {
      out.push_back('-');
    }
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out.empty() ? "district" : out;
}

/// Slug of `name` that does not collide with `taken`; "-2", "-3", ... on collision.
inline std::string unique_district_id(const std::string& name, const std::set<std::string>& taken) {
  const std::string base = slugify(name);
  if (!taken.contains(base)) return base;
  for (int n = 2;; ++n) {
    std::string candidate = base + "-" + std::to_string(n);
    if (!taken.contains(candidate)) return candidate;
  }
}

struct DistrictBlueprint {
  std::string id;
  std::string name;
  std::string description;
  std::vector<int> grid_indices;  // 1-based tile indices

  bool operator==(const DistrictBlueprint&) const = default;
};

struct GridDescription {
  int index = 0;
  std::string text;

  bool operator==(const GridDescription&) const = default;
};

using DescriptionMap = std::map<int, GridDescription>;

/// Occupancy grid with district membership.
///
/// Each occupied cell carries a stable tile index. Cells of a freshly planned
/// city get their 1-based row-major index; cells added later by expansion get
/// the next unused integer, so indices never change when the extent grows or
/// the origin moves.
class CityLayout {
 public:
  CityLayout() = default;

  /// Builds a rectangular plan. Every index in [1, rows*cols] must be claimed
  /// by exactly one district.
  static CityLayout from_districts(GridSize size, std::vector<DistrictBlueprint> districts) {
    if (size.rows < 1 || size.cols < 1) throw ValidationError("grid must be at least 1x1");
    const int total = size.rows * size.cols;
    std::map<int, std::set<std::string>> claims;
    std::set<std::string> ids;
    for (const auto& d : districts) {
      if (!ids.insert(d.id).second) throw ValidationError("duplicate district id '" + d.id + "'");
      if (d.grid_indices.empty()) throw ValidationError("district '" + d.id + "' has no grid indices");
      for (int idx : d.grid_indices) {
        if (idx < 1 || idx > total)
          throw IndexError("district '" + d.id + "' claims index " + std::to_string(idx) +
                           " outside [1, " + std::to_string(total) + "]");
        claims[idx].insert(d.id);
      }
      // repeated index inside one district also counts as overlap
      std::set<int> distinct(d.grid_indices.begin(), d.grid_indices.end());
      if (distinct.size() != d.grid_indices.size()) {
        std::vector<int> sorted = d.grid_indices;
        std::sort(sorted.begin(), sorted.end());
        auto dup = std::adjacent_find(sorted.begin(), sorted.end());
        throw OverlapError(*dup, {d.id});
      }
    }
    for (const auto& [idx, owners] : claims)
      if (owners.size() > 1) throw OverlapError(idx, owners);
    std::vector<int> missing;
    for (int i = 1; i <= total; ++i)
      if (!claims.contains(i)) missing.push_back(i);
    if (!missing.empty()) throw CoverageError(std::move(missing));

    CityLayout layout;
    layout.rows_ = size.rows;
    layout.cols_ = size.cols;
    for (auto& d : districts) {
      for (int idx : d.grid_indices) {
        GridCoord c = coord_of(idx, size.cols);
        layout.cells_[c] = d.id;
        layout.tiles_[c] = idx;
      }
      layout.districts_.emplace(d.id, std::move(d));
    }
    return layout;
  }

  struct Cell {
    GridCoord coord;
    std::string district;
    int tile = 0;
  };

  /// Rebuilds a layout from persisted parts, checking every invariant except
  /// rectangular coverage (expanded cities are not rectangles).
  static CityLayout from_cells(GridSize extent, const std::vector<Cell>& cells,
                               std::vector<DistrictBlueprint> districts) {
    CityLayout layout;
    layout.rows_ = extent.rows;
    layout.cols_ = extent.cols;
    for (auto& d : districts) {
      std::string id = d.id;
      if (!layout.districts_.emplace(id, std::move(d)).second)
        throw ValidationError("duplicate district id '" + id + "'");
    }
    std::set<int> seen_tiles;
    for (const auto& cell : cells) {
      if (cell.coord.row < 0 || cell.coord.col < 0 || cell.coord.row >= extent.rows ||
          cell.coord.col >= extent.cols)
        throw IndexError("cell " + to_string(cell.coord) + " outside layout extent");
      if (!layout.districts_.contains(cell.district))
        throw ValidationError("cell " + to_string(cell.coord) + " references unknown district '" +
                              cell.district + "'");
      if (!seen_tiles.insert(cell.tile).second || cell.tile < 1)
        throw ValidationError("duplicate or invalid tile index " + std::to_string(cell.tile));
      if (!layout.cells_.emplace(cell.coord, cell.district).second)
        throw OverlapError(cell.tile, {cell.district});
      layout.tiles_[cell.coord] = cell.tile;
    }
    for (const auto& [id, d] : layout.districts_)
      if (layout.cells_of(id).empty()) throw ValidationError("district '" + id + "' has no cells");
    return layout;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  GridSize extent() const { return {rows_, cols_}; }
  const std::map<GridCoord, std::string>& cells() const { return cells_; }
  const std::map<GridCoord, int>& tiles() const { return tiles_; }
  const std::map<std::string, DistrictBlueprint>& districts() const { return districts_; }

  bool occupied(GridCoord c) const { return cells_.contains(c); }

  std::optional<std::string> district_at(GridCoord c) const {
    auto it = cells_.find(c);
    if (it == cells_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<int> tile_at(GridCoord c) const {
    auto it = tiles_.find(c);
    if (it == tiles_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<GridCoord> coord_of_tile(int tile) const {
    for (const auto& [c, t] : tiles_)
      if (t == tile) return c;
    return std::nullopt;
  }

  std::vector<int> tile_indices() const {
    std::vector<int> out;
    out.reserve(tiles_.size());
    for (const auto& [c, t] : tiles_) out.push_back(t);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<GridCoord> cells_of(const std::string& district_id) const {
    std::vector<GridCoord> out;
    for (const auto& [c, id] : cells_)
      if (id == district_id) out.push_back(c);
    return out;
  }

  int next_tile_index() const {
    int top = 0;
    for (const auto& [c, t] : tiles_) top = std::max(top, t);
    return top + 1;
  }

  /// District ids whose cells are not 4-connected.
  std::vector<std::string> non_contiguous_districts() const {
    std::vector<std::string> out;
    for (const auto& [id, d] : districts_) {
      auto members = cells_of(id);
      if (members.size() < 2) continue;
      std::set<GridCoord> remaining(members.begin(), members.end());
      std::queue<GridCoord> frontier;
      frontier.push(members.front());
      remaining.erase(members.front());
      while (!frontier.empty()) {
        GridCoord c = frontier.front();
        frontier.pop();
        for (GridCoord n : {GridCoord{c.row - 1, c.col}, GridCoord{c.row + 1, c.col},
                            GridCoord{c.row, c.col - 1}, GridCoord{c.row, c.col + 1}}) {
          if (remaining.erase(n)) frontier.push(n);
        }
      }
      if (!remaining.empty()) out.push_back(id);
    }
    return out;
  }

  /// Result of adding one cell: the new layout and the translation that was
  /// applied to every cell to keep coordinates non-negative.
  struct Expansion;

  /// Adds a single-cell district at `at` (which may lie outside the current
  /// extent, including at negative coordinates) and re-origins the grid.
  Expansion with_cell(GridCoord at, DistrictBlueprint district, int tile) const;

  /// Every cell shifted by `delta`; extent recomputed. Coordinates must stay
  /// non-negative.
  CityLayout translated(GridCoord delta) const {
    CityLayout out;
    out.districts_ = districts_;
    for (const auto& [c, id] : cells_) {
      GridCoord moved{c.row + delta.row, c.col + delta.col};
      if (moved.row < 0 || moved.col < 0) throw IndexError("translation moves cells below zero");
      out.cells_[moved] = id;
      out.tiles_[moved] = tiles_.at(c);
    }
    out.rows_ = rows_ + delta.row;
    out.cols_ = cols_ + delta.col;
    out.shrink_extent_to_fit();
    return out;
  }

  bool operator==(const CityLayout&) const = default;

 private:
  void shrink_extent_to_fit() {
    int r = 0, c = 0;
    for (const auto& [coord, id] : cells_) {
      r = std::max(r, coord.row + 1);
      c = std::max(c, coord.col + 1);
    }
    rows_ = std::max(rows_, r);
    cols_ = std::max(cols_, c);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::map<GridCoord, std::string> cells_;
  std::map<GridCoord, int> tiles_;
  std::map<std::string, DistrictBlueprint> districts_;
};

struct CityLayout::Expansion {
  CityLayout layout;
  GridCoord translation;
  GridCoord placed;  // the new cell, after translation
};

inline CityLayout::Expansion CityLayout::with_cell(GridCoord at, DistrictBlueprint district,
                                                   int tile) const {
  if (occupied(at)) throw OccupiedError("cell " + to_string(at) + " is already occupied");
  if (districts_.contains(district.id))
    throw ValidationError("district id '" + district.id + "' already exists");
  for (const auto& [c, t] : tiles_)
    if (t == tile) throw ValidationError("tile index " + std::to_string(tile) + " already in use");

  GridCoord shift{std::max(0, -at.row), std::max(0, -at.col)};
  CityLayout out;
  out.districts_ = districts_;
  for (const auto& [c, id] : cells_) {
    GridCoord moved{c.row + shift.row, c.col + shift.col};
    out.cells_[moved] = id;
    out.tiles_[moved] = tiles_.at(c);
  }
  GridCoord placed{at.row + shift.row, at.col + shift.col};
  district.grid_indices = {tile};
  out.cells_[placed] = district.id;
  out.tiles_[placed] = tile;
  out.districts_.emplace(district.id, std::move(district));
  out.rows_ = rows_ + shift.row;
  out.cols_ = cols_ + shift.col;
  out.shrink_extent_to_fit();
  return {std::move(out), shift, placed};
}

inline std::optional<std::string> district_of(const CityLayout& layout, GridCoord coord) {
  return layout.district_at(coord);
}

namespace detail {

inline std::vector<int> read_grid_indices(const ordered_json& value, const std::string& area) {
  if (!value.is_array()) throw ParseError("\"Grid Index\" of area '" + area + "' is not a list");
  std::vector<int> out;
  for (const auto& v : value) {
    const std::string text = v.is_string() ? v.get<std::string>() : std::string{};
    if (v.is_number_integer()) {
      out.push_back(v.get<int>());
    } else if (!text.empty() && text.size() < 10 &&
               std::all_of(text.begin(), text.end(), [](unsigned char ch) { return std::isdigit(ch); })) {
      out.push_back(std::stoi(text));
    } else {
      throw ParseError("non-integer grid index in area '" + area + "'");
    }
  }
  return out;
}

}  // namespace detail

/// Reads the planner's CityPlan JSON ("Grid Size", "Areas" -> {"Description",
/// "Grid Index"}) and returns a validated rectangular layout. `forced` replaces
/// whatever grid size the plan states. A missing "Grid Size" means 2x3.
/// Non-contiguous districts are accepted; their ids are appended to `warnings`.
inline CityLayout validate_layout(const ordered_json& plan, std::optional<GridSize> forced = {},
                                  std::vector<std::string>* warnings = nullptr) {
  if (!plan.is_object()) throw ParseError("city plan is not a JSON object");
  GridSize size{2, 3};
  if (plan.contains("Grid Size")) {
    if (!plan["Grid Size"].is_string()) throw ParseError("\"Grid Size\" is not a string");
    size = parse_grid_size(plan["Grid Size"].get<std::string>());
  }
  if (forced) size = *forced;
  if (!plan.contains("Areas")) throw ParseError("city plan has no \"Areas\"");

  struct RawArea {
    std::string name;
    const ordered_json* body;
  };
  std::vector<RawArea> areas;
  const auto& raw = plan["Areas"];
  if (raw.is_object()) {
    for (auto it = raw.begin(); it != raw.end(); ++it) areas.push_back({it.key(), &it.value()});
  } else if (raw.is_array()) {
    for (const auto& item : raw) {
      if (!item.is_object() || !item.contains("Area Name") || !item["Area Name"].is_string())
        throw ParseError("area entry without \"Area Name\"");
      areas.push_back({item["Area Name"].get<std::string>(), &item});
    }
  } else {
    throw ParseError("\"Areas\" must be an object or a list");
  }
  if (areas.empty()) throw ParseError("city plan defines no areas");

  std::vector<DistrictBlueprint> districts;
  std::set<std::string> taken;
  for (const auto& area : areas) {
    const auto& body = *area.body;
    if (!body.is_object()) throw ParseError("area '" + area.name + "' is not an object");
    if (!body.contains("Grid Index")) throw ParseError("area '" + area.name + "' has no \"Grid Index\"");
    DistrictBlueprint d;
    d.name = area.name;
    d.id = unique_district_id(area.name, taken);
    taken.insert(d.id);
    if (body.contains("Description") && body["Description"].is_string())
      d.description = body["Description"].get<std::string>();
    d.grid_indices = detail::read_grid_indices(body["Grid Index"], area.name);
    districts.push_back(std::move(d));
  }
  CityLayout layout = CityLayout::from_districts(size, std::move(districts));
  if (warnings) {
    for (const auto& id : layout.non_contiguous_districts())
      warnings->push_back("district '" + id + "' is not contiguous");
  }
  return layout;
}

// JSON persistence of the layout.

inline json layout_to_json(const CityLayout& layout) {
  json districts = json::array();
  for (const auto& [id, d] : layout.districts()) {
    districts.push_back({{"id", d.id},
                         {"name", d.name},
                         {"description", d.description},
                         {"grid_indices", d.grid_indices}});
  }
  json cells = json::array();
  for (const auto& [c, id] : layout.cells()) {
    cells.push_back({{"row", c.row}, {"col", c.col}, {"district", id}, {"tile", layout.tiles().at(c)}});
  }
  return {{"rows", layout.rows()}, {"cols", layout.cols()}, {"districts", districts}, {"cells", cells}};
}

inline CityLayout layout_from_json(const json& j) {
  try {
    std::vector<DistrictBlueprint> districts;
    for (const auto& d : j.at("districts")) {
      districts.push_back({d.at("id").get<std::string>(), d.at("name").get<std::string>(),
                           d.value("description", std::string{}),
                           d.at("grid_indices").get<std::vector<int>>()});
    }
    std::vector<CityLayout::Cell> cells;
    for (const auto& c : j.at("cells")) {
      cells.push_back({{c.at("row").get<int>(), c.at("col").get<int>()},
                       c.at("district").get<std::string>(),
                       c.at("tile").get<int>()});
    }
    return CityLayout::from_cells({j.at("rows").get<int>(), j.at("cols").get<int>()}, cells,
                                  std::move(districts));
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed layout JSON: ") + e.what());
  }
}

}  // namespace gridcity
