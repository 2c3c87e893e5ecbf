// One PASS/FAIL line per acceptance criterion; exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "gridcity/expansion.hpp"
#include "gridcity/genloop.hpp"
#include "gridcity/json_util.hpp"
#include "gridcity/service/eval.hpp"
#include "gridcity/service/pipeline.hpp"
#include "oracle.hpp"
#include "test_support.hpp"

using namespace gridcity;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && out_.pass) out_.detail = what;
    out_.pass = out_.pass && ok;
  }
  Outcome done(std::string detail) {
    if (out_.pass) out_.detail = std::move(detail);
    return out_;
  }

 private:
  Outcome out_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome placement_oracle() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937 rng(31337);
  HashEmbedder he(5);
  auto embed = [&](const std::string& t) { return he.embed(t); };
  auto raw = [&](const std::string& t) { return he.embed(t).values; };
  const int trials = 240;
  int agree = 0;
  for (int i = 0; i < trials; ++i) {
    auto in = oracle::random_instance(rng, 6, 5);
    ExpansionConfig cfg;
    cfg.lambda = std::array{0.0, 0.5, 1.0}[i % 3];
    auto got = select_location(in.layout, in.descriptions, in.graph, cfg, embed);
    auto ref = oracle::argmin(in, cfg.lambda, raw);
    if (got.chosen == ref.chosen) ++agree;
  }
  const double secs = seconds_since(t0);
  c.expect(agree == trials, std::to_string(agree) + "/" + std::to_string(trials) + " instances agree");
  c.expect(secs < 5.0, fmt("took %.2f s", secs));
  return c.done(std::to_string(trials) + "/" + std::to_string(trials) + " agree, " + fmt("%.2f s", secs));
}

Outcome worked_example() {
  Check c;
  auto layout = CityLayout::from_cells({3, 2}, {{{0, 0}, "a", 1}, {{1, 0}, "c", 2}, {{2, 0}, "b", 3}},
                                       {{"a", "A", "", {}}, {"b", "B", "", {}}, {"c", "C", "", {}}});
  DescriptionMap desc;
  for (int t : layout.tile_indices()) desc[t] = {t, "same"};
  SceneGraph g{"New", "same", {{"a", Relation::kNear}, {"b", Relation::kFar}}};
  ExpansionConfig cfg;
  cfg.restrict_to_extent = true;
  auto sel = select_location(layout, desc, g, cfg, [](const std::string&) { return EmbeddingVector{{1.0, 0.0}}; });
  const std::vector<GridCoord> cells{{0, 1}, {1, 1}, {2, 1}};
  const std::vector<double> expected{1.0 - std::sqrt(5.0), 0.0, std::sqrt(5.0) - 1.0};
  c.expect(sel.breakdowns.size() == 3, "expected 3 candidates");
  for (std::size_t i = 0; i < std::min<std::size_t>(3, sel.breakdowns.size()); ++i) {
    c.expect(sel.breakdowns[i].candidate == cells[i], "candidate order");
    c.expect(std::abs(sel.breakdowns[i].l_dist - expected[i]) <= 1e-6, fmt("l_dist %.6f off", sel.breakdowns[i].l_dist));
    c.expect(std::abs(std::abs(sel.breakdowns[i].l_dist) - std::array{1.23607, 0.0, 1.23607}[i]) <= 1e-5, "rounded value");
  }
  c.expect(sel.chosen == GridCoord{0, 1}, "did not select (0,1)");
  return c.done("L_dist = {" + fmt("%.5f", sel.breakdowns[0].l_dist) + ", " + fmt("%.5f", sel.breakdowns[1].l_dist) +
                ", " + fmt("%.5f", sel.breakdowns[2].l_dist) + "}, chose (0,1)");
}

Outcome constants() {
  Check c;
  EngineConfig cfg;
  const auto& w = cfg.expansion.weights;
  c.expect(w[Relation::kNear] == 1.0 && w[Relation::kRelativelyNear] == 0.5 && w[Relation::kSlightlyNear] == 0.1 &&
               w[Relation::kNoSpecialConstraint] == 0.0 && w[Relation::kFar] == -1.0,
           "relation weights");
  c.expect(cfg.expansion.lambda == 1.0, "lambda");
  c.expect(cfg.loop.acceptance_threshold == 6, "threshold");
  c.expect(cfg.loop.max_iterations == 3, "iteration cap");
  c.expect(cfg.style.road.rgba.c == std::array{0.15, 0.15, 0.15, 1.0}, "road rgba");
  c.expect(cfg.style.ground.rgba.c == std::array{0.50, 0.50, 0.50, 1.0}, "ground rgba");
  c.expect(cfg.style.road.roughness == 0.9 && cfg.style.ground.roughness == 0.9, "roughness");
  auto parsed = config_from_json(nlohmann::json::object());
  c.expect(parsed.expansion.lambda == 1.0 && parsed.loop.acceptance_threshold == 6, "empty config file changes defaults");
  return c.done("weights (1, 0.5, 0.1, 0, -1), lambda 1, threshold 6, cap 3, materials match");
}

TileJob scripted_loop(const std::vector<int>& scores, std::shared_ptr<ScriptedChat>* chat_out = nullptr) {
  auto chat = std::make_shared<ScriptedChat>();
  int k = 0;
  for (int s : scores)
    chat->push(std::string(tmpl::kEvaluateImage),
               "Score: " + std::to_string(s) + "\nReason: r\nRewrite: rewrite " + std::to_string(++k));
  ModelHub hub(make_mock_providers(0, chat));
  TileJob job;
  job.index = 1;
  job.description = "original";
  job = run_loop(hub, job, "a city");
  if (chat_out) *chat_out = chat;
  return job;
}

Outcome loop_behavior() {
  Check c;
  std::shared_ptr<ScriptedChat> chat;
  auto a = scripted_loop({4, 5, 7}, &chat);
  c.expect(a.status == TileStatus::kDone && a.iterations.size() == 3 && a.final_iteration == 3 && !a.below_threshold,
           "[4,5,7]");
  auto calls = chat->calls();
  for (std::size_t k = 0; k + 1 < a.iterations.size(); ++k) {
    c.expect(a.iterations[k + 1].prompt_used == a.iterations[k].verdict.rewrite, "rewrite not propagated");
    c.expect(calls.at(k + 1).variables.at("grid_description") == a.iterations[k].verdict.rewrite, "evaluator input");
  }
  c.expect(a.iterations[0].prompt_used == "original", "first instruction");
  auto b = scripted_loop({8});
  c.expect(b.iterations.size() == 1 && b.final_iteration == 1, "[8]");
  auto d = scripted_loop({4, 4, 5});
  c.expect(d.iterations.size() == 3 && d.final_iteration == 3 && d.below_threshold, "[4,4,5]");
  return c.done("[4,5,7] -> 3 iterations, [8] -> 1, [4,4,5] -> final 3 below threshold, rewrites propagate");
}

template <class E>
bool rejected_with(const ordered_json& plan) {
  try {
    validate_layout(plan);
  } catch (const E&) {
    return true;
  } catch (const std::exception&) {
  }
  return false;
}

Outcome layout_validation() {
  Check c;
  std::ifstream in(testsupport::data_dir("one_by_three/global_planner/01.txt"));
  std::stringstream ss;
  ss << in.rdbuf();
  auto one_by_three = validate_layout(extract_json(ss.str()));
  c.expect(one_by_three.extent() == GridSize{1, 3} && one_by_three.tile_indices().size() == 3, "1 X 3 example");

  auto plan = [](const std::string& size, std::vector<std::pair<std::string, std::vector<int>>> areas) {
    ordered_json p = {{"Grid Size", size}, {"Areas", ordered_json::object()}};
    for (auto& [n, idx] : areas) p["Areas"][n] = {{"Description", n}, {"Grid Index", idx}};
    return p;
  };
  auto spanning = validate_layout(plan("2x3", {{"A", {1, 2, 4, 5}}, {"B", {3, 6}}}));
  c.expect(spanning.cells_of("a").size() == 4, "spanning district");

  c.expect(rejected_with<OverlapError>(plan("2x2", {{"A", {1, 2}}, {"B", {2, 3, 4}}})), "overlap");
  c.expect(rejected_with<CoverageError>(plan("2x2", {{"A", {1, 2}}, {"B", {4}}})), "coverage gap");
  return c.done("1 X 3 and [1,2,4,5] validate; overlap -> OverlapError, gap -> CoverageError");
}

Outcome end_to_end() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const PlanRequest req{"a compact coastal town with a harbour and an old market", GridSize{2, 3}, std::nullopt};
  std::string manifest[2];
  for (int run = 0; run < 2; ++run) {
    ProjectStore store(testsupport::fresh_dir("accept-e2e" + std::to_string(run)));
    ModelHub hub(make_mock_providers(42));
    run_pipeline(store, hub, EngineConfig{}, req);
    manifest[run] = store.manifest_text().value_or("");
  }
  const double secs = seconds_since(t0);
  auto j = nlohmann::json::parse(manifest[0]);
  c.expect(manifest[0] == manifest[1], "manifests differ");
  c.expect(j["placements"].size() == 6, "placements");
  c.expect(j["roads"].size() == 7, "roads");
  c.expect(secs < 60.0, fmt("took %.1f s", secs));
  return c.done("byte-identical manifest, 6 placements, 7 roads, " + fmt("%.2f s", secs));
}

Outcome expansion_replay() {
  Check c;
  auto chat = ScriptedChat::from_directory(testsupport::data_dir("school"), std::make_shared<MockChat>());
  const char* replies[] = {
      R"({"block_name": "Riverside Park", "block_description": "Lawns and a boardwalk.", "spatial_relations": {"Industrial Park": "far", "Urban Residential District": "slightly_near"}})",
      R"({"block_name": "Tech Campus", "block_description": "Glass research labs.", "spatial_relations": {"Central Business District": "near", "Industrial Park": "relatively_near"}})",
      R"({"block_name": "Freight Yard", "block_description": "Rail sidings and depots.", "spatial_relations": {"Industrial Park": "near", "Urban Residential District": "far"}})"};
  for (const char* r : replies) chat->push(std::string(tmpl::kExpansion), r);
  ModelHub hub(make_mock_providers(0, chat));
  ProjectStore store(testsupport::fresh_dir("accept-replay"));
  run_pipeline(store, hub, EngineConfig{}, {"a mid-sized city", std::nullopt, std::nullopt});
  for (const char* req : {"a middle high school", "a riverside park", "a tech campus", "a freight yard"})
    expand_city(store, hub, EngineConfig{}, req);
  auto p = ProjectStore(store.root()).load();
  c.expect(p.history.size() == 4, "history length");
  const auto replayed = replay_history(p.initial_layout, p.history);
  c.expect(replayed == p.layout, "replayed layout differs");
  c.expect(replayed.cells() == p.layout.cells(), "cells differ");

  std::mt19937 rng(4);
  HashEmbedder he(3);
  auto embed = [&](const std::string& t) { return he.embed(t); };
  int invariant = 0;
  for (int i = 0; i < 50; ++i) {
    auto in = oracle::random_instance(rng);
    GridCoord d{std::uniform_int_distribution(0, 5)(rng), std::uniform_int_distribution(0, 5)(rng)};
    auto a = select_location(in.layout, in.descriptions, in.graph, {}, embed);
    auto b = select_location(in.layout.translated(d), in.descriptions, in.graph, {}, embed);
    invariant += b.chosen == GridCoord{a.chosen.row + d.row, a.chosen.col + d.col};
  }
  c.expect(invariant == 50, std::to_string(invariant) + "/50 shifted instances invariant");
  return c.done("4 expansions replay cell-for-cell (" + std::to_string(p.layout.cells().size()) +
                " cells); x* shifts with the city in 50/50 instances");
}

Outcome eval_arithmetic() {
  Check c;
  ProjectStore a(testsupport::fresh_dir("accept-eval-a")), b(testsupport::fresh_dir("accept-eval-b"));
  const PlanRequest req{"a hill town", GridSize{1, 3}, std::nullopt};
  {
    ModelHub ha(make_mock_providers(1)), hb(make_mock_providers(2));
    run_pipeline(a, ha, EngineConfig{}, req);
    run_pipeline(b, hb, EngineConfig{}, req);
  }
  auto run = [&](std::vector<std::string> replies, int repeats) {
    auto judge = std::make_shared<ScriptedChat>();
    for (int i = 0; i < 500; ++i) judge->push(std::string(tmpl::kJudgeVisual), replies[i % replies.size()]);
    ProviderSet set = make_mock_providers();
    set.judge = judge;
    ModelHub hub(set);
    EvalOptions opts;
    opts.repeats = repeats;
    opts.alignment = false;
    auto report = run_eval(a, b, hub, opts);
    return std::make_pair(std::move(report), judge->call_count(tmpl::kJudgeVisual));
  };
  const auto [once, once_calls] = run({"A", "B", "B", "nonsense"}, 1);
  const auto [twice, twice_calls] = run({"A", "B", "B", "nonsense"}, 2);
  c.expect(once_calls > 0 && twice_calls == 2 * once_calls, "repeat-twice does not double calls");
  for (const auto& dim : kEvalDimensions) {
    const auto& t = twice.judge.at(dim);
    c.expect(t.total() == 2 * once.judge.at(dim).total(), "counts not doubled for " + dim);
    c.expect(std::abs(t.rate_a() + t.rate_b() - 100.0) < 1e-9, "rates do not sum to 100 for " + dim);
    c.expect(t.a + t.b + t.invalid == t.total(), "tally");
  }
  const auto [all_a, unused] = run({"A"}, 2);
  for (const auto& dim : kEvalDimensions) c.expect(all_a.judge.at(dim).rate_a() == 100.0, "all-A judge");
  return c.done("rates sum to 100% over valid votes; repeats=2 gives " + std::to_string(twice_calls) + " calls vs " +
                std::to_string(once_calls));
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"placement oracle equivalence", placement_oracle},
      {"worked example", worked_example},
      {"constants conformance", constants},
      {"loop behavior", loop_behavior},
      {"layout validation", layout_validation},
      {"end-to-end determinism", end_to_end},
      {"expansion replay", expansion_replay},
      {"eval harness arithmetic", eval_arithmetic},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %-30s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  }
  return failures;
}
