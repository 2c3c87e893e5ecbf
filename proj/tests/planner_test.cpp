#include <gtest/gtest.h>

#include <algorithm>

#include "gridcity/mock_providers.hpp"
#include "gridcity/planner.hpp"
#include "oracle.hpp"

using namespace gridcity;

namespace {

const std::string kCorpus = std::string(GRIDCITY_TEST_DATA_DIR) + "/corpus.jsonl";

const char* kOneByThree = R"(```json
{
    "Grid Size": "1 X 3",
    "Areas": {
        "Residential District": {"Description": "Apartments.", "Grid Index": [1, 2]},
        "Commercial Center": {"Description": "Malls.", "Grid Index": [3]}
    }
}
```)";

struct Scripted {
  std::shared_ptr<ScriptedChat> chat = std::make_shared<ScriptedChat>(std::make_shared<MockChat>());
  ModelHub hub{make_mock_providers(0, chat)};
};

}  // namespace

TEST(Retrieval, MatchesBruteForceTopK) {
  ModelHub hub(make_mock_providers(5));
  auto corpus = load_corpus(kCorpus);
  HashEmbedder he(5);
  for (const std::string query : {"Barcelona", "Tokyo high-rise", "boulevards", "harbour"}) {
    for (int k = 1; k <= 6; ++k) {
      std::vector<std::pair<double, std::string>> all;
      for (const auto& d : corpus)
        all.emplace_back(-oracle::dot_cos(he.embed(query).values, he.embed(d.body).values), d.id);
      std::sort(all.begin(), all.end());
      std::vector<std::string> expect;
      for (int i = 0; i < k; ++i) expect.push_back(all[i].second);
      EXPECT_EQ(rank_documents(hub, corpus, query, k), expect) << query << " k=" << k;
    }
  }
  EXPECT_THROW(rank_documents(hub, {}, "x", 3), EmptyCorpusError);
}

TEST(Retrieval, SummaryIsBoundedAndRecordsSources) {
  ModelHub hub(make_mock_providers(1));
  auto corpus = load_corpus(kCorpus);
  auto s = retrieve_reference_summary(hub, corpus, "Barcelona", 3, 120);
  EXPECT_LE(s.traits.size(), 120u);
  EXPECT_FALSE(s.traits.empty());
  EXPECT_EQ(s.source_doc_ids.size(), 3u);
}

TEST(GlobalPlan, OneByThreeExample) {
  Scripted s;
  s.chat->push(std::string(tmpl::kGlobalPlanner), kOneByThree);
  auto out = global_plan(s.hub, {"a small town", std::nullopt, std::nullopt}, std::nullopt);
  EXPECT_EQ(out.attempts, 1);
  EXPECT_EQ(out.layout.extent(), (GridSize{1, 3}));
  EXPECT_EQ(*out.layout.district_at({0, 1}), "residential-district");
  EXPECT_EQ(s.chat->calls()[0].variables.at("reference_summary"), "None");
}

TEST(GlobalPlan, ForcedSizeInPromptAndLayout) {
  Scripted s;
  auto out = global_plan(s.hub, {"a river city", GridSize{3, 3}, std::nullopt}, std::nullopt);
  EXPECT_EQ(out.layout.extent(), (GridSize{3, 3}));
  const auto& prompt = s.chat->calls()[0].prompt;
  EXPECT_NE(prompt.find("Grid Layout: 3\xC3\x97" "3"), std::string::npos);
}

TEST(GlobalPlan, OverlapThenFixed) {
  Scripted s;
  s.chat->push(std::string(tmpl::kGlobalPlanner),
               R"({"Grid Size": "1x2", "Areas": {"A": {"Description": "a", "Grid Index": [1, 2]},
                   "B": {"Description": "b", "Grid Index": [2]}}})");
  s.chat->push(std::string(tmpl::kGlobalPlanner),
               R"({"Grid Size": "1x2", "Areas": {"A": {"Description": "a", "Grid Index": [1]},
                   "B": {"Description": "b", "Grid Index": [2]}}})");
  auto out = global_plan(s.hub, {"x", std::nullopt, std::nullopt}, std::nullopt);
  EXPECT_EQ(out.attempts, 2);
  ASSERT_EQ(out.rejected.size(), 1u);
}

TEST(GlobalPlan, ExhaustedRetries) {
  Scripted s;
  for (int i = 0; i < 3; ++i) s.chat->push(std::string(tmpl::kGlobalPlanner), "not json");
  try {
    global_plan(s.hub, {"x", std::nullopt, std::nullopt}, std::nullopt);
    FAIL();
  } catch (const PlanValidationError& e) {
    EXPECT_EQ(e.attempts(), 3);
  }
}

TEST(LocalDesign, OneCallPerDistrict) {
  Scripted s;
  auto layout = validate_layout(extract_json(kOneByThree));
  auto desc = design_city(s.hub, layout, "a town");
  EXPECT_EQ(desc.size(), 3u);
  EXPECT_EQ(s.chat->call_count(tmpl::kLocalDesigner), 2);

  Scripted t;
  auto six = CityLayout::from_districts({2, 3}, {{"a", "A", "x", {1, 2}}, {"b", "B", "y", {3, 4}}, {"c", "C", "z", {5, 6}}});
  auto d6 = design_city(t.hub, six, "a town");
  EXPECT_EQ(d6.size(), 6u);
  EXPECT_EQ(t.chat->call_count(tmpl::kLocalDesigner), 3);
  for (int i = 1; i <= 6; ++i) EXPECT_FALSE(d6.at(i).text.empty());
}

TEST(LocalDesign, MissingKeyRaises) {
  Scripted s;
  auto layout = CityLayout::from_districts({1, 6}, {{"a", "A", "x", {1, 2, 3, 4, 5, 6}}});
  for (int i = 0; i < 3; ++i)
    s.chat->push(std::string(tmpl::kLocalDesigner), R"({"1": "a", "2": "b", "3": "c", "4": "d", "6": "f"})");
  try {
    local_design(s.hub, layout, layout.districts().at("a"), "p");
    FAIL();
  } catch (const DesignValidationError& e) {
    EXPECT_EQ(e.missing(), std::set<int>{5});
    EXPECT_TRUE(e.extra().empty());
  }
}
