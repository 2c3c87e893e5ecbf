#pragma once

// Per-tile produce -> refine -> evaluate image loop and image-to-3D lifting.

#include <functional>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "gridcity/config.hpp"
#include "gridcity/errors.hpp"
#include "gridcity/image.hpp"
#include "gridcity/mesh.hpp"
#include "gridcity/providers.hpp"

namespace gridcity {

struct EvalVerdict {
  int score = 0;
  std::string reason;
  std::string rewrite;
};

struct IterationRecord {
  int iteration = 0;
  std::string prompt_used;
  Image produced;
  Image refined;
  EvalVerdict verdict;
};

enum class TileStatus { kPending, kRunning, kDone, kFailed };

inline std::string to_string(TileStatus s) {
  switch (s) {
    case TileStatus::kPending: return "pending";
    case TileStatus::kRunning: return "running";
    case TileStatus::kDone: return "done";
    case TileStatus::kFailed: return "failed";
  }
  return "pending";
}

inline TileStatus tile_status_from_string(const std::string& s) {
  if (s == "pending") return TileStatus::kPending;
  if (s == "running") return TileStatus::kRunning;
  if (s == "done") return TileStatus::kDone;
  if (s == "failed") return TileStatus::kFailed;
  throw ParseError("unknown tile status '" + s + "'");
}

struct TileJob {
  int index = 0;
  std::string description;
  std::vector<IterationRecord> iterations;
  std::optional<Image> final_image;
  int final_iteration = 0;
  std::optional<MeshAsset> mesh;
  TileStatus status = TileStatus::kPending;
  /// Done, but no iteration reached the acceptance threshold.
  bool below_threshold = false;
  std::string error;
};

/// Reads the evaluator's "Score:" / "Reason:" / "Rewrite:" lines. The rewrite
/// runs to the end of the text and may span several lines.
inline EvalVerdict parse_verdict(std::string_view text) {
  static const std::regex label_re(R"(^[ \t*]*(score|reason|rewrite)[ \t*]*:[ \t*]*(.*)$)", std::regex::icase);
  static const std::regex score_re(R"(^\[?[ \t]*(-?\d+)[ \t]*\]?(?:[ \t]*/[ \t]*10)?[ \t.*]*$)");

  auto trim = [](std::string t) {
    const auto a = t.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return std::string{};
    return t.substr(a, t.find_last_not_of(" \t\r\n") - a + 1);
  };

  std::optional<std::string> score_text;
  std::optional<std::string> reason;
  std::optional<std::string> rewrite;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string line(text.substr(pos, end - pos));
    std::smatch m;
    if (rewrite) {
      *rewrite += "\n" + line;  // everything after "Rewrite:" belongs to it
    } else if (std::regex_match(line, m, label_re)) {
      std::string label = m[1];
      for (auto& ch : label) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      if (label == "score" && !score_text) score_text = trim(m[2]);
      else if (label == "reason" && !reason) reason = trim(m[2]);
      else if (label == "rewrite") rewrite = m[2].str();
    }
    pos = end + 1;
  }

  if (!score_text) throw VerdictParseError("evaluator output has no Score line");
  std::smatch m;
  if (!std::regex_match(*score_text, m, score_re))
    throw VerdictParseError("evaluator score '" + *score_text + "' is not an integer");
  EvalVerdict v;
  v.score = std::stoi(m[1]);
  if (v.score < 0 || v.score > 10) throw VerdictParseError("evaluator score " + std::to_string(v.score) + " outside [0, 10]");
  if (reason) v.reason = *reason;
  if (rewrite) v.rewrite = trim(*rewrite);
  return v;
}

/// Platform-anchored isometric generation for one tile.
inline Image produce(ModelHub& hub, const std::string& instruction, const std::string& city_prompt) {
  if (instruction.empty()) throw Error("tile description must not be empty");
  return hub.generate_image(tmpl::kGenerateImage, {{"city_instruction", city_prompt}, {"grid_description", instruction}});
}

/// Platform removal and refinement.
inline Image refine(ModelHub& hub, const Image& image) { return hub.edit_image(tmpl::kRefineImage, {}, image); }

inline EvalVerdict evaluate(ModelHub& hub, const Image& refined, const std::string& instruction, int parse_retries = 2) {
  for (int attempt = 0;; ++attempt) {
    const std::string reply = hub.chat(tmpl::kEvaluateImage, {{"grid_description", instruction}}, {refined});
    try {
      return parse_verdict(reply);
    } catch (const VerdictParseError&) {
      if (attempt >= parse_retries) throw;
    }
  }
}

inline MeshAsset lift_to_3d(ModelHub& hub, const Image& image) {
  if (image.empty()) throw Error("cannot lift an empty image");
  MeshAsset mesh = hub.image_to_mesh(image);
  if (mesh.bbox.degenerate()) throw GeometryError("image-to-3D returned a degenerate bounding box");
  if (mesh.glb.empty()) throw GeometryError("image-to-3D returned no mesh data");
  return mesh;
}

/// Called after each completed iteration (for persistence and progress).
using IterationObserver = std::function<void(const TileJob&, const IterationRecord&)>;

/// Runs the loop for one tile until a verdict reaches the threshold or the
/// iteration cap is hit. A failed verdict's rewrite becomes the next
/// iteration's generation instruction. On exhaustion the best-scoring
/// iteration (earliest on ties) is kept and the job is flagged below-threshold.
/// Provider, parse and geometry errors leave the job failed, never thrown.
inline TileJob run_loop(ModelHub& hub, TileJob job, const std::string& city_prompt, const LoopConfig& cfg = {},
                        const IterationObserver& observer = {}) {
  if (job.status != TileStatus::kPending) throw Error("tile job " + std::to_string(job.index) + " is not pending");
  job.status = TileStatus::kRunning;
  try {
    std::string instruction = job.description;
    for (int k = 1; k <= cfg.max_iterations; ++k) {
      IterationRecord rec;
      rec.iteration = k;
      rec.prompt_used = instruction;
      rec.produced = produce(hub, instruction, city_prompt);
      rec.refined = refine(hub, rec.produced);
      rec.verdict = evaluate(hub, rec.refined, instruction);
      if (rec.verdict.score < cfg.acceptance_threshold && rec.verdict.rewrite.empty())
        rec.verdict.rewrite = instruction;  // same as "reprint the original prompt"
      job.iterations.push_back(rec);
      if (observer) observer(job, job.iterations.back());
      if (rec.verdict.score >= cfg.acceptance_threshold) break;
      instruction = rec.verdict.rewrite;
    }
    const IterationRecord* chosen = &job.iterations.back();
    if (chosen->verdict.score < cfg.acceptance_threshold) {
      job.below_threshold = true;
      for (const auto& rec : job.iterations)
        if (rec.verdict.score > chosen->verdict.score || (rec.verdict.score == chosen->verdict.score && rec.iteration < chosen->iteration))
          chosen = &rec;
    }
    job.final_iteration = chosen->iteration;
    job.final_image = chosen->refined;
    job.mesh = lift_to_3d(hub, *job.final_image);
    job.status = TileStatus::kDone;
  } catch (const std::exception& e) {
    job.status = TileStatus::kFailed;
    job.error = e.what();
  }
  return job;
}

}  // namespace gridcity
