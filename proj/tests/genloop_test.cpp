#include <gtest/gtest.h>

#include "gridcity/genloop.hpp"
#include "gridcity/mock_providers.hpp"

using namespace gridcity;

namespace {

struct Harness {
  std::shared_ptr<ScriptedChat> chat = std::make_shared<ScriptedChat>();
  ProviderSet set;
  std::unique_ptr<ModelHub> hub;

  explicit Harness(std::vector<int> scores, BoundingBox box = {1, 1, 1}) {
    int k = 0;
    for (int s : scores) {
      ++k;
      chat->push(std::string(tmpl::kEvaluateImage),
                 "Score: " + std::to_string(s) + "\nReason: r" + std::to_string(k) + "\nRewrite: rewrite " + std::to_string(k));
    }
    set = make_mock_providers(0, chat);
    set.mesh_lifter = std::make_shared<MockMeshLifter>(box);
    hub = std::make_unique<ModelHub>(set);
  }

  TileJob run(LoopConfig cfg = {}) {
    TileJob job;
    job.index = 1;
    job.description = "original description";
    return run_loop(*hub, job, "a coastal city", cfg);
  }
};

}  // namespace

TEST(Verdict, Parses) {
  auto v = parse_verdict("Score: 7\nReason: Clean layout.\nRewrite: Keep it.\n");
  EXPECT_EQ(v.score, 7);
  EXPECT_EQ(v.reason, "Clean layout.");
  EXPECT_EQ(v.rewrite, "Keep it.");
  EXPECT_EQ(parse_verdict("**Score:** [4]\nReason: x\nRewrite: line one\nline two").rewrite, "line one\nline two");
  EXPECT_EQ(parse_verdict("score: 8/10").score, 8);
  EXPECT_THROW(parse_verdict("Reason: none"), VerdictParseError);
  EXPECT_THROW(parse_verdict("Score: high"), VerdictParseError);
  EXPECT_THROW(parse_verdict("Score: 11"), VerdictParseError);
}

TEST(Loop, AcceptsOnThirdIteration) {
  Harness h({4, 5, 7});
  auto job = h.run();
  EXPECT_EQ(job.status, TileStatus::kDone);
  EXPECT_EQ(job.iterations.size(), 3u);
  EXPECT_EQ(job.final_iteration, 3);
  EXPECT_FALSE(job.below_threshold);
  ASSERT_TRUE(job.mesh);
}

TEST(Loop, AcceptsImmediately) {
  Harness h({8});
  auto job = h.run();
  EXPECT_EQ(job.iterations.size(), 1u);
  EXPECT_EQ(job.final_iteration, 1);
  EXPECT_EQ(h.chat->call_count(tmpl::kEvaluateImage), 1);
}

TEST(Loop, ExhaustionKeepsBestScore) {
  Harness h({4, 4, 5});
  auto job = h.run();
  EXPECT_EQ(job.status, TileStatus::kDone);
  EXPECT_EQ(job.iterations.size(), 3u);
  EXPECT_EQ(job.final_iteration, 3);
  EXPECT_TRUE(job.below_threshold);
  EXPECT_EQ(job.final_image->png, job.iterations[2].refined.png);
}

TEST(Loop, ExhaustionTieGoesToEarliest) {
  Harness h({5, 3, 5});
  auto job = h.run();
  EXPECT_EQ(job.final_iteration, 1);
  EXPECT_TRUE(job.below_threshold);
}

TEST(Loop, ThresholdIsInclusive) {
  Harness h({6});
  EXPECT_FALSE(h.run().below_threshold);
}

TEST(Loop, RewriteBecomesNextInstruction) {
  Harness h({3, 9});
  auto job = h.run();
  ASSERT_EQ(job.iterations.size(), 2u);
  EXPECT_EQ(job.iterations[0].prompt_used, "original description");
  EXPECT_EQ(job.iterations[1].prompt_used, "rewrite 1");
  auto calls = h.chat->calls();
  EXPECT_EQ(calls[1].variables.at("grid_description"), "rewrite 1");
  EXPECT_NE(job.iterations[0].produced.png, job.iterations[1].produced.png);
}

TEST(Loop, RefineRunsOnProducedImage) {
  Harness h({8});
  auto job = h.run();
  EXPECT_EQ(text_tag(job.iterations[0].produced, "gridcity:stage"), std::optional<std::string>("produced"));
  EXPECT_EQ(text_tag(job.iterations[0].refined, "gridcity:stage"), std::optional<std::string>("refined"));
  EXPECT_EQ(text_tag(*job.final_image, "gridcity:stage"), std::optional<std::string>("refined"));
}

TEST(Loop, DegenerateMeshFailsJob) {
  Harness h({8}, {1, 0, 1});
  auto job = h.run();
  EXPECT_EQ(job.status, TileStatus::kFailed);
  EXPECT_NE(job.error.find("degenerate"), std::string::npos);
}

TEST(Loop, UnparsableVerdictRetriedThenFails) {
  Harness h({});
  for (int i = 0; i < 3; ++i) h.chat->push(std::string(tmpl::kEvaluateImage), "looks fine to me");
  auto job = h.run();
  EXPECT_EQ(job.status, TileStatus::kFailed);
  EXPECT_EQ(h.chat->call_count(tmpl::kEvaluateImage), 3);
}

TEST(Loop, MockDeterminism) {
  auto once = [] {
    ModelHub hub(make_mock_providers(42));
    TileJob job;
    job.index = 3;
    job.description = "Grid 3: terracotta rooftops around a square";
    return run_loop(hub, job, "a hill town");
  };
  auto a = once(), b = once();
  ASSERT_EQ(a.status, TileStatus::kDone);
  EXPECT_EQ(a.iterations.size(), b.iterations.size());
  EXPECT_EQ(a.final_image->png, b.final_image->png);
  EXPECT_EQ(a.mesh->glb, b.mesh->glb);
}

TEST(Loop, CapIsRespected) {
  Harness h({1, 1, 1, 1, 1});
  LoopConfig cfg;
  cfg.max_iterations = 2;
  EXPECT_EQ(h.run(cfg).iterations.size(), 2u);
}
