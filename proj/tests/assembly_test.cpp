#include <gtest/gtest.h>

#include "gridcity/assembly.hpp"

using namespace gridcity;

namespace {

CityProject done_project(const CityLayout& layout, BoundingBox box = {1, 1, 1}) {
  CityProject p;
  p.layout = p.initial_layout = layout;
  for (int t : layout.tile_indices()) {
    TileAsset a;
    a.status = TileStatus::kDone;
    a.mesh_path = tile_dir(t) + "/model.glb";
    a.bbox = box;
    p.assets[t] = a;
  }
  return p;
}

CityLayout two_by_three() { return CityLayout::from_districts({2, 3}, {{"a", "A", "", {1, 2, 3, 4, 5, 6}}}); }

// brute-force: count unordered 4-adjacent occupied pairs
int adjacent_pairs(const CityLayout& layout) {
  int n = 0;
  for (const auto& [a, ia] : layout.cells())
    for (const auto& [b, ib] : layout.cells())
      if (a < b && std::abs(a.row - b.row) + std::abs(a.col - b.col) == 1) ++n;
  return n;
}

}  // namespace

TEST(Transform, ScaleFitsLargerExtent) {
  auto p = compute_transform({0, 0}, {2.0, 1.0, 3.0});
  EXPECT_NEAR(p.uniform_scale, 0.475, 1e-12);
  EXPECT_NEAR(p.translation.x, 0.5, 1e-12);
  EXPECT_NEAR(p.translation.y, 0.5, 1e-12);
  EXPECT_EQ(p.translation.z, 0.0);
}

TEST(Transform, IdentityCase) {
  AssemblyConfig cfg;
  cfg.fill_ratio = 1.0;
  auto p = compute_transform({1, 2}, {1, 1, 1}, cfg);
  EXPECT_DOUBLE_EQ(p.uniform_scale, 1.0);
  EXPECT_DOUBLE_EQ(p.translation.x, 2.5);
  EXPECT_DOUBLE_EQ(p.translation.y, 1.5);
}

TEST(Transform, EqualFootprintsAcrossMeshSizes) {
  for (BoundingBox b : {BoundingBox{0.3, 0.2, 1}, BoundingBox{5, 7, 2}, BoundingBox{1, 1, 9}}) {
    auto p = compute_transform({0, 0}, b);
    EXPECT_NEAR(std::max(b.dx, b.dy) * p.uniform_scale, 0.95, 1e-12);
  }
  EXPECT_THROW(compute_transform({0, 0}, {1, 0, 1}), GeometryError);
}

TEST(Roads, AdjacencyCounts) {
  EXPECT_EQ(build_roads(two_by_three(), std::nullopt).size(), 7u);
  auto two = CityLayout::from_cells({1, 3}, {{{0, 0}, "a", 1}, {{0, 1}, "a", 2}}, {{"a", "A", "", {}}});
  EXPECT_EQ(build_roads(two, std::nullopt).size(), 1u);
  auto lone = CityLayout::from_cells({1, 3}, {{{0, 0}, "a", 1}, {{0, 2}, "a", 2}}, {{"a", "A", "", {}}});
  EXPECT_TRUE(build_roads(lone, std::nullopt).empty());
  auto mid = CityLayout::from_districts({1, 3}, {{"a", "A", "", {1, 2, 3}}});
  EXPECT_EQ(build_roads(mid, std::nullopt).size(), 2u);
}

TEST(Roads, ExplicitConnections) {
  auto roads = build_roads(two_by_three(), RoadConnections{{1, 2}, {2, 1}});
  ASSERT_EQ(roads.size(), 1u);
  EXPECT_EQ(roads[0].from_index, 1);
  EXPECT_DOUBLE_EQ(roads[0].start[0], 1.0);
  EXPECT_DOUBLE_EQ(roads[0].width, 0.12);
  EXPECT_THROW(build_roads(two_by_three(), RoadConnections{{1, 3}}), RoadError);
  EXPECT_THROW(build_roads(two_by_three(), RoadConnections{{1, 9}}), RoadError);
}

TEST(Roads, MatchBruteForceOnIrregularLayouts) {
  auto layout = CityLayout::from_cells(
      {3, 3}, {{{0, 0}, "a", 1}, {{0, 1}, "a", 2}, {{1, 1}, "a", 3}, {{2, 1}, "a", 4}, {{2, 2}, "a", 5}},
      {{"a", "A", "", {}}});
  EXPECT_EQ(static_cast<int>(build_roads(layout, std::nullopt).size()), adjacent_pairs(layout));
}

TEST(Assemble, DefaultMaterialsAndCounts) {
  auto m = assemble(done_project(two_by_three()));
  EXPECT_EQ(m.placements.size(), 6u);
  EXPECT_EQ(m.roads.size(), 7u);
  EXPECT_EQ(m.style.road.rgba.c, (std::array<double, 4>{0.15, 0.15, 0.15, 1.0}));
  EXPECT_EQ(m.ground_material.rgba.c, (std::array<double, 4>{0.5, 0.5, 0.5, 1.0}));
  EXPECT_DOUBLE_EQ(m.style.road.roughness, 0.9);
  EXPECT_DOUBLE_EQ(m.ground_extent[2], 3.0);
  EXPECT_DOUBLE_EQ(m.ground_extent[3], 2.0);
  for (const auto& r : m.roads) EXPECT_EQ(r.material, m.style.road);
}

TEST(Assemble, StyleOverride) {
  StyleConfig style = style_from_json(nlohmann::json::parse(R"({"road": {"rgba": [0.2, 0.1, 0.1, 1.0], "roughness": 0.5}})"));
  auto m = assemble(done_project(two_by_three()), style);
  EXPECT_EQ(m.roads[0].material.rgba.c, (std::array<double, 4>{0.2, 0.1, 0.1, 1.0}));
  EXPECT_DOUBLE_EQ(m.roads[0].material.roughness, 0.5);
  EXPECT_EQ(m.ground_material, StyleConfig{}.ground);
  EXPECT_THROW(style_from_json(nlohmann::json::parse(R"({"road": {"rgba": [2, 0, 0, 1]}})")), Error);
}

TEST(Assemble, FootprintsDoNotOverlap) {
  auto m = assemble(done_project(two_by_three(), {3.0, 2.0, 1.0}));
  for (const auto& a : m.placements)
    for (const auto& b : m.placements) {
      if (a.index == b.index) continue;
      const double ha = std::max(a.bbox.dx, a.bbox.dy) * a.uniform_scale / 2;
      const double hb = std::max(b.bbox.dx, b.bbox.dy) * b.uniform_scale / 2;
      const bool apart = std::abs(a.translation.x - b.translation.x) >= ha + hb - 1e-12 ||
                         std::abs(a.translation.y - b.translation.y) >= ha + hb - 1e-12;
      EXPECT_TRUE(apart) << a.index << " vs " << b.index;
    }
}

TEST(Assemble, Deterministic) {
  auto p = done_project(two_by_three());
  EXPECT_EQ(manifest_text(assemble(p)), manifest_text(assemble(p)));
  EXPECT_EQ(export_gltf(assemble(p))["nodes"].size(), 1u + 6u + 1u + 7u);
}

TEST(Assemble, IncompleteCity) {
  auto p = done_project(two_by_three());
  p.assets[4].status = TileStatus::kFailed;
  p.assets.erase(6);
  try {
    assemble(p);
    FAIL();
  } catch (const IncompleteCityError& e) {
    EXPECT_EQ(e.indices(), (std::vector<int>{4, 6}));
  }
}
