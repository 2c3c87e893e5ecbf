#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridcity/providers.hpp"
#include "gridcity/service/project_store.hpp"

namespace gridcity {

inline const std::array<std::string, 5> kEvalDimensions = {"Geometric Fidelity", "Texture Clarity", "Layout Coherence",
                                                           "Scene Coverage", "Overall Realism"};

/// Votes for one dimension. Rates are over valid votes only.
struct VoteTally {
  int a = 0;
  int b = 0;
  int invalid = 0;

  int total() const { return a + b + invalid; }
  int valid() const { return a + b; }
  double rate_a() const { return valid() ? 100.0 * a / valid() : 0.0; }
  double rate_b() const { return valid() ? 100.0 * b / valid() : 0.0; }
};

/// Exactly "A" or "B" after trimming whitespace; anything else is invalid.
std::optional<char> parse_vote(const std::string& reply);

struct AlignmentScore {
  std::vector<double> per_tile;  // valid replies only
  int invalid = 0;
  double mean() const;
};

/// Reads "yes"/"no" or a number in [0, 1].
std::optional<double> parse_alignment(const std::string& reply);

struct EvalOptions {
  int repeats = 2;
  bool alignment = true;
  std::optional<std::filesystem::path> human_votes;  // CSV: comparison-id,dimension,vote
};

struct EvalReport {
  std::string prompt;
  std::vector<std::string> comparisons;  // ids: "city", "tile-<i>"
  int repeats = 2;
  std::map<std::string, VoteTally> judge;  // by dimension
  std::map<std::string, VoteTally> human;
  AlignmentScore alignment_a;
  AlignmentScore alignment_b;
};

/// Pairwise judging of project A against project B: the composed boards and
/// every tile index both have, once per dimension, each comparison repeated
/// `repeats` times in the same order.
EvalReport run_eval(const ProjectStore& a, const ProjectStore& b, ModelHub& hub, const EvalOptions& options = {});

/// Adds human votes from a CSV file into report.human.
void ingest_human_votes(EvalReport& report, const std::filesystem::path& csv);

nlohmann::json report_to_json(const EvalReport& report);
std::string report_table(const EvalReport& report);

}  // namespace gridcity
