#pragma once

#include <array>
#include <cctype>
#include <vector>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "gridcity/errors.hpp"
#include "gridcity/providers.hpp"

namespace gridcity {

/// Qualitative distance from the new grid to an existing district.
enum class Relation { kNear, kRelativelyNear, kSlightlyNear, kNoSpecialConstraint, kFar };

inline constexpr std::array<Relation, 5> kAllRelations = {Relation::kNear, Relation::kRelativelyNear,
                                                          Relation::kSlightlyNear, Relation::kNoSpecialConstraint,
                                                          Relation::kFar};

/// Wire token, as used in expansion replies and config files.
inline std::string relation_token(Relation r) {
  switch (r) {
    case Relation::kNear: return "near";
    case Relation::kRelativelyNear: return "relatively_near";
    case Relation::kSlightlyNear: return "slightly_near";
    case Relation::kNoSpecialConstraint: return "no_special_constraint";
    case Relation::kFar: return "far";
  }
  return "no_special_constraint";
}

/// Accepts underscores, hyphens or spaces between words, any case.
inline Relation parse_relation(std::string token) {
  for (auto& ch : token) {
    if (ch == '-' || ch == ' ') ch = '_';
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  for (Relation r : kAllRelations)
    if (relation_token(r) == token) return r;
  throw ParseError("unknown spatial relation '" + token + "'");
}

/// Signed weight per relation kind.
struct RelationWeights {
  std::map<Relation, double> weight = {{Relation::kNear, 1.0},
                                       {Relation::kRelativelyNear, 0.5},
                                       {Relation::kSlightlyNear, 0.1},
                                       {Relation::kNoSpecialConstraint, 0.0},
                                       {Relation::kFar, -1.0}};

  double operator[](Relation r) const { return weight.at(r); }
};

struct Rgba {
  std::array<double, 4> c{0, 0, 0, 1};
  bool operator==(const Rgba&) const = default;
};

struct Material {
  Rgba rgba;
  double roughness = 0.9;

  void validate(const std::string& what) const {
    for (double v : rgba.c)
      if (!(v >= 0.0 && v <= 1.0)) throw Error(what + ": colour components must lie in [0, 1]");
    if (!(roughness >= 0.0 && roughness <= 1.0)) throw Error(what + ": roughness must lie in [0, 1]");
  }
  bool operator==(const Material&) const = default;
};

struct StyleConfig {
  Material road{{{0.15, 0.15, 0.15, 1.0}}, 0.9};
  Material ground{{{0.50, 0.50, 0.50, 1.0}}, 0.9};
};

struct PlannerConfig {
  int retries = 2;
  int retrieval_k = 3;
  std::size_t summary_max_chars = 1200;
};

struct LoopConfig {
  int acceptance_threshold = 6;
  int max_iterations = 3;
};

struct ExpansionConfig {
  RelationWeights weights;
  double lambda = 1.0;
  double tie_tolerance = 1e-9;
  /// Divide each grid's distance contribution by its district's cell count.
  bool normalize_by_district_size = false;
  /// Only consider frontier cells inside the current [0, rows) x [0, cols)
  /// extent. Off: the plane is unbounded.
  bool restrict_to_extent = false;
};

struct AssemblyConfig {
  double tile_size = 1.0;
  double fill_ratio = 0.95;
  double road_width_ratio = 0.12;
};

struct EngineConfig {
  PlannerConfig planner;
  LoopConfig loop;
  ExpansionConfig expansion;
  AssemblyConfig assembly;
  StyleConfig style;
  int tile_workers = 2;
  std::map<std::string, ProviderConfig> providers;
};

namespace detail {

inline Material read_material(const nlohmann::json& j, Material base, const std::string& what) {
  if (j.contains("rgba")) {
    auto v = j.at("rgba").get<std::vector<double>>();
    if (v.size() != 4) throw Error(what + ": rgba needs 4 components");
    std::copy(v.begin(), v.end(), base.rgba.c.begin());
  }
  if (j.contains("roughness")) base.roughness = j.at("roughness").get<double>();
  base.validate(what);
  return base;
}

}  // namespace detail

inline StyleConfig style_from_json(const nlohmann::json& j, StyleConfig base = {}) {
  if (j.contains("road")) base.road = detail::read_material(j["road"], base.road, "road material");
  if (j.contains("ground")) base.ground = detail::read_material(j["ground"], base.ground, "ground material");
  return base;
}

inline nlohmann::json material_to_json(const Material& m) {
  return {{"rgba", {m.rgba.c[0], m.rgba.c[1], m.rgba.c[2], m.rgba.c[3]}}, {"roughness", m.roughness}};
}

/// Overlays a JSON config document on the defaults. Unknown keys are ignored.
inline EngineConfig config_from_json(const nlohmann::json& j) {
  EngineConfig cfg;
  try {
    if (auto p = j.find("planner"); p != j.end()) {
      cfg.planner.retries = p->value("retries", cfg.planner.retries);
      cfg.planner.retrieval_k = p->value("retrieval_k", cfg.planner.retrieval_k);
      cfg.planner.summary_max_chars = p->value("summary_max_chars", cfg.planner.summary_max_chars);
    }
    if (auto p = j.find("loop"); p != j.end()) {
      cfg.loop.acceptance_threshold = p->value("acceptance_threshold", cfg.loop.acceptance_threshold);
      cfg.loop.max_iterations = p->value("max_iterations", cfg.loop.max_iterations);
    }
    if (auto p = j.find("expansion"); p != j.end()) {
      cfg.expansion.lambda = p->value("lambda", cfg.expansion.lambda);
      cfg.expansion.normalize_by_district_size =
          p->value("normalize_by_district_size", cfg.expansion.normalize_by_district_size);
      cfg.expansion.restrict_to_extent = p->value("restrict_to_extent", cfg.expansion.restrict_to_extent);
      if (auto w = p->find("relation_weights"); w != p->end())
        for (auto it = w->begin(); it != w->end(); ++it)
          cfg.expansion.weights.weight[parse_relation(it.key())] = it.value().get<double>();
    }
    if (auto p = j.find("assembly"); p != j.end()) {
      cfg.assembly.tile_size = p->value("tile_size", cfg.assembly.tile_size);
      cfg.assembly.fill_ratio = p->value("fill_ratio", cfg.assembly.fill_ratio);
      cfg.assembly.road_width_ratio = p->value("road_width_ratio", cfg.assembly.road_width_ratio);
    }
    if (auto p = j.find("style"); p != j.end()) cfg.style = style_from_json(*p, cfg.style);
    cfg.tile_workers = j.value("tile_workers", cfg.tile_workers);
    if (auto p = j.find("providers"); p != j.end()) {
      for (auto it = p->begin(); it != p->end(); ++it) {
        ProviderConfig pc;
        const auto& v = it.value();
        pc.endpoint = v.value("endpoint", pc.endpoint);
        pc.credential_env = v.value("credential_env", pc.credential_env);
        pc.model = v.value("model", pc.model);
        pc.timeout_s = v.value("timeout_s", pc.timeout_s);
        pc.max_retries = v.value("max_retries", pc.max_retries);
        pc.backoff_base_s = v.value("backoff_base_s", pc.backoff_base_s);
        pc.max_concurrency = v.value("max_concurrency", pc.max_concurrency);
        pc.validate();
        cfg.providers[it.key()] = pc;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid config: ") + e.what());
  }
  if (cfg.loop.max_iterations < 1) throw Error("loop.max_iterations must be >= 1");
  if (cfg.tile_workers < 1) throw Error("tile_workers must be >= 1");
  if (!(cfg.assembly.fill_ratio > 0 && cfg.assembly.fill_ratio <= 1)) throw Error("fill_ratio must lie in (0, 1]");
  if (!(cfg.assembly.tile_size > 0)) throw Error("tile_size must be > 0");
  return cfg;
}

inline EngineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("config file " + path.string() + ": " + e.what());
  }
}

}  // namespace gridcity
