#include <gtest/gtest.h>

#include <random>

#include "gridcity/core.hpp"
#include "gridcity/json_util.hpp"

using namespace gridcity;

namespace {

const char* kOneByThreePlan = R"({
    "Grid Size": "1 X 3",
    "Areas": {
        "Residential District": {
            "Description": "A medium-density housing zone with 4-6 story apartment buildings.",
            "Grid Index": [1, 2]
        },
        "Commercial Center": {
            "Description": "A bustling commercial core with multi-story malls.",
            "Grid Index": [3]
        }
    }
})";

ordered_json plan_with(const std::string& size, std::vector<std::pair<std::string, std::vector<int>>> areas) {
  ordered_json plan = {{"Grid Size", size}, {"Areas", ordered_json::object()}};
  for (auto& [name, idx] : areas) plan["Areas"][name] = {{"Description", name + " blocks"}, {"Grid Index", idx}};
  return plan;
}

}  // namespace

TEST(Indexing, RowMajorOneBased) {
  EXPECT_EQ(index_of({1, 0}, 3), 4);
  EXPECT_EQ(index_of({0, 0}, 3), 1);
  EXPECT_EQ(index_of({2, 2}, 3), 9);
  EXPECT_THROW(index_of({0, 3}, 3), IndexError);
  EXPECT_THROW(index_of({-1, 0}, 3), IndexError);
}

TEST(Indexing, Inverse) {
  EXPECT_EQ(coord_of(4, 3), (GridCoord{1, 0}));
  EXPECT_EQ(coord_of(1, 5), (GridCoord{0, 0}));
  EXPECT_EQ(coord_of(7, 3), (GridCoord{2, 0}));
  EXPECT_THROW(coord_of(0, 3), IndexError);
}

TEST(Indexing, BijectionProperty) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 2000; ++trial) {
    const int cols = std::uniform_int_distribution(1, 50)(rng);
    const GridCoord c{std::uniform_int_distribution(0, 200)(rng), std::uniform_int_distribution(0, cols - 1)(rng)};
    ASSERT_EQ(coord_of(index_of(c, cols), cols), c);
    const int idx = std::uniform_int_distribution(1, 10000)(rng);
    ASSERT_EQ(index_of(coord_of(idx, cols), cols), idx);
  }
}

TEST(GridSize, AcceptedSpellings) {
  EXPECT_EQ(parse_grid_size("2\xC3\x97" "3"), (GridSize{2, 3}));
  EXPECT_EQ(parse_grid_size("1 X 3"), (GridSize{1, 3}));
  EXPECT_EQ(parse_grid_size(" 3 x 3 "), (GridSize{3, 3}));
  EXPECT_EQ(parse_grid_size("2x4"), (GridSize{2, 4}));
  EXPECT_THROW(parse_grid_size("2 by 3"), ParseError);
  EXPECT_THROW(parse_grid_size("0x3"), ParseError);
  EXPECT_THROW(parse_grid_size(""), ParseError);
}

TEST(Slug, CollisionSuffix) {
  EXPECT_EQ(slugify("Central Business District"), "central-business-district");
  EXPECT_EQ(slugify("  Caf\xC3\xA9 & Bar!! "), "caf-bar");
  EXPECT_EQ(unique_district_id("Park", {"park"}), "park-2");
  EXPECT_EQ(unique_district_id("Park", {"park", "park-2"}), "park-3");
}

TEST(ValidateLayout, OneByThreeExamplePlan) {
  auto layout = validate_layout(extract_json(kOneByThreePlan));
  EXPECT_EQ(layout.rows(), 1);
  EXPECT_EQ(layout.cols(), 3);
  EXPECT_EQ(layout.districts().size(), 2u);
  EXPECT_EQ(*layout.district_at({0, 0}), "residential-district");
  EXPECT_EQ(*layout.district_at({0, 2}), "commercial-center");
  EXPECT_EQ(layout.districts().at("residential-district").description.substr(0, 22), "A medium-density housi");
}

TEST(ValidateLayout, SpanningDistrict) {
  auto layout = validate_layout(plan_with("2x3", {{"A", {1, 2, 4, 5}}, {"B", {3, 6}}}));
  EXPECT_EQ(layout.cells().size(), 6u);
  EXPECT_EQ(*layout.district_at({1, 1}), "a");
  EXPECT_EQ(*layout.district_at({1, 2}), "b");
  EXPECT_EQ(*layout.tile_at({1, 2}), 6);
}

TEST(ValidateLayout, SingleCell) {
  auto layout = validate_layout(plan_with("1x1", {{"Only", {1}}}));
  EXPECT_EQ(layout.cells().size(), 1u);
}

TEST(ValidateLayout, Overlap) {
  try {
    validate_layout(plan_with("2x2", {{"A", {1, 2}}, {"B", {2, 3, 4}}}));
    FAIL() << "expected OverlapError";
  } catch (const OverlapError& e) {
    EXPECT_EQ(e.index(), 2);
    EXPECT_EQ(e.districts(), (std::set<std::string>{"a", "b"}));
  }
}

TEST(ValidateLayout, CoverageGap) {
  try {
    validate_layout(plan_with("2x2", {{"A", {1, 2}}, {"B", {4}}}));
    FAIL() << "expected CoverageError";
  } catch (const CoverageError& e) {
    EXPECT_EQ(e.indices(), std::vector<int>{3});
  }
}

TEST(ValidateLayout, OutOfRangeAndMalformed) {
  EXPECT_THROW(validate_layout(plan_with("1x2", {{"A", {1, 2, 3}}})), IndexError);
  EXPECT_THROW(validate_layout(plan_with("one by two", {{"A", {1, 2}}})), ParseError);
  EXPECT_THROW(validate_layout(ordered_json::parse(R"({"Grid Size": "1x1"})")), ParseError);
}

TEST(ValidateLayout, MissingSizeDefaultsToTwoByThree) {
  ordered_json plan = plan_with("2x3", {{"A", {1, 2, 3, 4, 5, 6}}});
  plan.erase("Grid Size");
  EXPECT_EQ(validate_layout(plan).extent(), (GridSize{2, 3}));
}

TEST(ValidateLayout, ForcedSizeOverridesReply) {
  auto layout = validate_layout(plan_with("1 X 3", {{"A", {1, 2, 3, 4, 5, 6}}}), GridSize{2, 3});
  EXPECT_EQ(layout.extent(), (GridSize{2, 3}));
}

TEST(ValidateLayout, AreasAsListAndDuplicateNames) {
  auto plan = ordered_json::parse(R"({"Grid Size": "1x2", "Areas": [
      {"Area Name": "Park", "Description": "x", "Grid Index": [1]},
      {"Area Name": "Park", "Description": "y", "Grid Index": ["2"]}]})");
  auto layout = validate_layout(plan);
  EXPECT_EQ(*layout.district_at({0, 0}), "park");
  EXPECT_EQ(*layout.district_at({0, 1}), "park-2");
}

TEST(ValidateLayout, NonContiguousWarns) {
  std::vector<std::string> warnings;
  validate_layout(plan_with("1x3", {{"A", {1, 3}}, {"B", {2}}}), std::nullopt, &warnings);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("'a'"), std::string::npos);
}

// Accepts iff the claimed multiset is exactly {1..H*W}.
TEST(ValidateLayout, TotalityProperty) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const int rows = std::uniform_int_distribution(1, 4)(rng), cols = std::uniform_int_distribution(1, 4)(rng);
    const int n = rows * cols;
    const int districts = std::uniform_int_distribution(1, 4)(rng);
    std::vector<std::pair<std::string, std::vector<int>>> areas(static_cast<std::size_t>(districts));
    std::multiset<int> claimed;
    for (int d = 0; d < districts; ++d) {
      areas[d].first = "D" + std::to_string(d);
      const int k = std::uniform_int_distribution(1, 4)(rng);
      for (int i = 0; i < k; ++i) {
        int idx = std::uniform_int_distribution(1, n + 1)(rng);
        areas[d].second.push_back(idx);
        claimed.insert(idx);
      }
    }
    std::multiset<int> exact;
    for (int i = 1; i <= n; ++i) exact.insert(i);
    const bool should_accept = claimed == exact;
    bool accepted = true;
    try {
      validate_layout(plan_with(std::to_string(rows) + "x" + std::to_string(cols), areas));
    } catch (const Error&) {
      accepted = false;
    }
    ASSERT_EQ(accepted, should_accept) << "trial " << trial;
  }
}

TEST(DistrictOf, OccupiedEmptyAndAfterExpansion) {
  auto layout = validate_layout(extract_json(kOneByThreePlan));
  EXPECT_EQ(district_of(layout, {0, 1}), "residential-district");
  EXPECT_EQ(district_of(layout, {1, 1}), std::nullopt);
  auto expanded = layout.with_cell({1, 1}, {"school", "School", "campus", {}}, 4);
  EXPECT_EQ(district_of(expanded.layout, {1, 1}), "school");
  EXPECT_EQ(*expanded.layout.tile_at({1, 1}), 4);
}

TEST(Layout, ReoriginKeepsTileIdentity) {
  auto layout = validate_layout(extract_json(kOneByThreePlan));
  auto expanded = layout.with_cell({-1, 0}, {"school", "School", "", {}}, 4);
  EXPECT_EQ(expanded.translation, (GridCoord{1, 0}));
  EXPECT_EQ(expanded.placed, (GridCoord{0, 0}));
  EXPECT_EQ(expanded.layout.extent(), (GridSize{2, 3}));
  EXPECT_EQ(*expanded.layout.tile_at({1, 0}), 1);
  EXPECT_EQ(*expanded.layout.tile_at({0, 0}), 4);
  EXPECT_THROW(layout.with_cell({0, 0}, {"x", "X", "", {}}, 5), OccupiedError);
}

TEST(Layout, JsonRoundTrip) {
  auto layout = validate_layout(plan_with("2x3", {{"A", {1, 2, 4, 5}}, {"B", {3, 6}}}));
  auto expanded = layout.with_cell({0, -1}, {"c", "C", "new", {}}, 7).layout;
  EXPECT_EQ(layout_from_json(layout_to_json(expanded)), expanded);
}

TEST(CanonicalJson, FixedPrecisionSortedKeys) {
  json j = {{"b", 1.0 / 3.0}, {"a", {{"z", -0.0}, {"y", 2}}}, {"c", "x"}};
  EXPECT_EQ(canonical_dump(j),
            "{\n  \"a\": {\n    \"y\": 2,\n    \"z\": 0.000000\n  },\n  \"b\": 0.333333,\n  \"c\": \"x\"\n}\n");
}

TEST(ExtractJson, ToleratesFencesAndProse) {
  EXPECT_EQ(extract_json("```json\n{\"a\": 1}\n```")["a"], 1);
  EXPECT_EQ(extract_json("Here is the plan:\n{\"a\": 2}\nThanks")["a"], 2);
  EXPECT_THROW(extract_json("no json here"), ParseError);
  EXPECT_THROW(extract_json("{\"a\": }"), ParseError);
}
