#include "gridcity/service/eval.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gridcity/service/pipeline.hpp"

namespace gridcity {

namespace {

std::string trimmed(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  return s.substr(a, s.find_last_not_of(" \t\r\n") - a + 1);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::optional<Image> tile_image(const ProjectStore& store, const CityProject& p, int index) {
  auto it = p.assets.find(index);
  if (it == p.assets.end() || it->second.status != TileStatus::kDone) return std::nullopt;
  auto bytes = store.read_bytes(it->second.image_path);
  if (!bytes) return std::nullopt;
  return Image{*bytes};
}

std::string fmt(double v, const char* spec = "%.1f") {
  char buf[32];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

std::optional<char> parse_vote(const std::string& reply) {
  const std::string t = trimmed(reply);
  if (t == "A" || t == "B") return t[0];
  return std::nullopt;
}

double AlignmentScore::mean() const {
  if (per_tile.empty()) return 0.0;
  return std::accumulate(per_tile.begin(), per_tile.end(), 0.0) / static_cast<double>(per_tile.size());
}

std::optional<double> parse_alignment(const std::string& reply) {
  std::string t = lower(trimmed(reply));
  while (!t.empty() && (t.back() == '.' || t.back() == '!')) t.pop_back();
  if (t == "yes") return 1.0;
  if (t == "no") return 0.0;
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used == t.size() && v >= 0.0 && v <= 1.0) return v;
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

EvalReport run_eval(const ProjectStore& a, const ProjectStore& b, ModelHub& hub, const EvalOptions& options) {
  if (options.repeats < 1) throw Error("repeats must be >= 1");
  const CityProject pa = a.load(), pb = b.load();
  EvalReport report;
  report.prompt = pa.prompt;
  report.repeats = options.repeats;

  std::vector<std::pair<std::string, std::pair<Image, Image>>> pairs;
  pairs.push_back({"city", {render_board(a, pa), render_board(b, pb)}});
  for (int idx : pa.layout.tile_indices()) {
    auto ia = tile_image(a, pa, idx), ib = tile_image(b, pb, idx);
    if (ia && ib) pairs.push_back({"tile-" + std::to_string(idx), {*ia, *ib}});
  }
  for (const auto& [id, imgs] : pairs) report.comparisons.push_back(id);

  for (const auto& dim : kEvalDimensions) {
    VoteTally& tally = report.judge[dim];
    for (const auto& [id, imgs] : pairs) {
      for (int r = 0; r < options.repeats; ++r) {
        std::string reply;
        try {
          reply = hub.judge(tmpl::kJudgeVisual, {{"city_instruction", pa.prompt}, {"dimension", dim}},
                            {imgs.first, imgs.second});
        } catch (const ProviderError&) {
          reply.clear();
        }
        auto vote = parse_vote(reply);
        if (!vote) ++tally.invalid;
        else if (*vote == 'A') ++tally.a;
        else ++tally.b;
      }
    }
  }

  if (options.alignment) {
    auto align = [&](const ProjectStore& store, const CityProject& p, AlignmentScore& out) {
      for (int idx : p.layout.tile_indices()) {
        auto img = tile_image(store, p, idx);
        if (!img) continue;
        auto v = parse_alignment(hub.chat(tmpl::kAlignmentQuery, {{"city_instruction", p.prompt}}, {*img}));
        if (v) out.per_tile.push_back(*v);
        else ++out.invalid;
      }
    };
    align(a, pa, report.alignment_a);
    align(b, pb, report.alignment_b);
  }
  if (options.human_votes) ingest_human_votes(report, *options.human_votes);
  return report;
}

void ingest_human_votes(EvalReport& report, const std::filesystem::path& csv) {
  std::ifstream in(csv);
  if (!in) throw Error("cannot open human votes " + csv.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trimmed(line).empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(trimmed(cell));
    if (cols.size() != 3) throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": expected 3 columns");
    if (line_no == 1 && lower(cols[0]) == "comparison-id") continue;
    bool known = false;
    for (const auto& d : kEvalDimensions) known = known || d == cols[1];
    if (!known) throw ParseError(csv.string() + ":" + std::to_string(line_no) + ": unknown dimension '" + cols[1] + "'");
    VoteTally& t = report.human[cols[1]];
    auto vote = parse_vote(cols[2]);
    if (!vote) ++t.invalid;
    else if (*vote == 'A') ++t.a;
    else ++t.b;
  }
}

nlohmann::json report_to_json(const EvalReport& report) {
  auto tallies = [](const std::map<std::string, VoteTally>& m) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& dim : kEvalDimensions) {
      auto it = m.find(dim);
      if (it == m.end()) continue;
      const auto& t = it->second;
      out[dim] = {{"a", t.a}, {"b", t.b}, {"invalid", t.invalid}, {"total", t.total()},
                  {"win_rate_a", t.rate_a()}, {"win_rate_b", t.rate_b()}};
    }
    return out;
  };
  auto align = [](const AlignmentScore& s) {
    return nlohmann::json{{"mean", s.mean()}, {"queries", s.per_tile.size() + static_cast<std::size_t>(s.invalid)},
                          {"invalid", s.invalid}};
  };
  int invalid = 0;
  for (const auto& [d, t] : report.judge) invalid += t.invalid;
  return {{"prompt", report.prompt},
          {"dimensions", kEvalDimensions},
          {"comparisons", report.comparisons},
          {"repeats", report.repeats},
          {"judge", tallies(report.judge)},
          {"judge_invalid", invalid},
          {"human", tallies(report.human)},
          {"alignment", {{"a", align(report.alignment_a)}, {"b", align(report.alignment_b)}}}};
}

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  auto row = [&](const std::string& label, const std::map<std::string, VoteTally>& m) {
    out << label;
    for (const auto& dim : kEvalDimensions) {
      auto it = m.find(dim);
      out << " | " << (it == m.end() ? std::string("-") : fmt(it->second.rate_a()) + " / " + fmt(it->second.rate_b()));
    }
    out << "\n";
  };
  out << "Judge";
  for (const auto& dim : kEvalDimensions) out << " | " << dim;
  out << "\n";
  row("Model (A / B %)", report.judge);
  if (!report.human.empty()) row("Human (A / B %)", report.human);
  int invalid = 0, total = 0;
  for (const auto& [d, t] : report.judge) invalid += t.invalid, total += t.total();
  out << "comparisons: " << report.comparisons.size() << " x " << report.repeats << " repeats per dimension, "
      << total << " judge calls, " << invalid << " invalid\n";
  out << "alignment: A " << fmt(report.alignment_a.mean(), "%.3f") << ", B " << fmt(report.alignment_b.mean(), "%.3f")
      << "\n";
  return out.str();
}

}  // namespace gridcity
