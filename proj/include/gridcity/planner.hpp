#pragma once

// Global planning (size, districts, allocation) and per-tile local design,
// optionally grounded in a local reference corpus.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridcity/config.hpp"
#include "gridcity/core.hpp"
#include "gridcity/json_util.hpp"
#include "gridcity/providers.hpp"

namespace gridcity {

struct CorpusDoc {
  std::string id;
  std::string title;
  std::string body;
};

struct ReferenceSummary {
  std::string city;
  std::string traits;
  std::vector<std::string> source_doc_ids;
};

struct PlanRequest {
  std::string prompt;
  std::optional<GridSize> forced_size;
  std::optional<std::string> reference_city;
};

/// Reads a JSON-lines corpus: one {"id", "title", "body"} object per line.
inline std::vector<CorpusDoc> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus " + path.string());
  std::vector<CorpusDoc> docs;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      CorpusDoc doc{j.at("id").get<std::string>(), j.value("title", std::string{}), j.at("body").get<std::string>()};
      if (!ids.insert(doc.id).second) throw ParseError("duplicate corpus id '" + doc.id + "'");
      docs.push_back(std::move(doc));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return docs;
}

/// Top-k document ids by cosine similarity between the query and each body;
/// ties go to the smaller id.
inline std::vector<std::string> rank_documents(ModelHub& hub, const std::vector<CorpusDoc>& corpus,
                                               const std::string& query, int k) {
  if (corpus.empty()) throw EmptyCorpusError("reference corpus is empty");
  if (k < 1) throw Error("retrieval k must be >= 1");
  const EmbeddingVector q = hub.embed(query);
  std::vector<std::pair<double, const CorpusDoc*>> scored;
  for (const auto& doc : corpus) scored.emplace_back(cosine(q, hub.embed(doc.body)), &doc);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->id < b.second->id;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && static_cast<int>(i) < k; ++i) out.push_back(scored[i].second->id);
  return out;
}

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

/// Cuts at the last whitespace at or before `max_chars` bytes.
inline std::string truncate_text(std::string s, std::size_t max_chars) {
  if (s.size() <= max_chars) return s;
  auto cut = s.find_last_of(" \t\n", max_chars);
  if (cut == std::string::npos || cut == 0) {
    cut = max_chars;
    while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;  // UTF-8 boundary
  }
  return trim(s.substr(0, cut));
}

}  // namespace detail

inline ReferenceSummary retrieve_reference_summary(ModelHub& hub, const std::vector<CorpusDoc>& corpus,
                                                   const std::string& city, int k,
                                                   std::size_t max_chars = PlannerConfig{}.summary_max_chars) {
  auto ids = rank_documents(hub, corpus, city, k);
  std::string documents;
  for (const auto& id : ids) {
    auto it = std::find_if(corpus.begin(), corpus.end(), [&](const CorpusDoc& d) { return d.id == id; });
    documents += "[" + it->id + "] " + it->title + "\n" + it->body + "\n\n";
  }
  std::string traits = detail::trim(hub.chat(tmpl::kReferenceDistill, {{"reference_city", city}, {"documents", documents}}));
  if (traits.empty()) throw ProviderError("reference summary came back empty");
  return {city, detail::truncate_text(std::move(traits), max_chars), std::move(ids)};
}

struct PlanOutcome {
  CityLayout layout;
  int attempts = 0;
  std::vector<std::string> rejected;  // validator message per failed attempt
  std::vector<std::string> warnings;
};

/// One planner call per attempt; the reply must validate as a layout. A forced
/// size is stated in the prompt and also overrides whatever size the reply claims.
inline PlanOutcome global_plan(ModelHub& hub, const PlanRequest& request,
                               const std::optional<ReferenceSummary>& summary, const PlannerConfig& cfg = {}) {
  if (detail::trim(request.prompt).empty()) throw Error("city prompt must not be empty");
  std::string instruction = request.prompt;
  std::string grid_size;
  if (request.forced_size) {
    grid_size = format_grid_size(*request.forced_size);
    instruction += "\nGrid Layout: " + grid_size;
  }
  const Variables vars = {{"city_instruction", instruction},
                          {"reference_summary", summary ? summary->traits : std::string("None")},
                          {"grid_size", grid_size}};
  PlanOutcome outcome;
  for (int attempt = 1; attempt <= cfg.retries + 1; ++attempt) {
    outcome.attempts = attempt;
    const std::string reply = hub.chat(tmpl::kGlobalPlanner, vars);
    try {
      outcome.warnings.clear();
      outcome.layout = validate_layout(extract_json(reply), request.forced_size, &outcome.warnings);
      return outcome;
    } catch (const ParseError& e) {
      outcome.rejected.emplace_back(e.what());
    } catch (const ValidationError& e) {
      outcome.rejected.emplace_back(e.what());
    } catch (const IndexError& e) {
      outcome.rejected.emplace_back(e.what());
    }
  }
  throw PlanValidationError(outcome.rejected.back(), outcome.attempts);
}

/// Descriptions for every cell of one district, from a single designer call
/// per attempt. The reply's keys must equal the district's tile indices.
inline DescriptionMap local_design(ModelHub& hub, const CityLayout& layout, const DistrictBlueprint& district,
                                   const std::string& prompt, int retries = PlannerConfig{}.retries) {
  if (!layout.districts().contains(district.id))
    throw Error("district '" + district.id + "' is not part of the layout");
  std::set<int> expected;
  for (const auto& c : layout.cells_of(district.id)) expected.insert(*layout.tile_at(c));
  nlohmann::ordered_json area = {{"Area Name", district.name},
                                 {"Description", district.description},
                                 {"Grid Index", std::vector<int>(expected.begin(), expected.end())}};
  const Variables vars = {{"city_instruction", prompt}, {"area_json", area.dump()}};

  std::set<int> missing = expected, extra;
  for (int attempt = 1; attempt <= retries + 1; ++attempt) {
    const std::string reply = hub.chat(tmpl::kLocalDesigner, vars);
    DescriptionMap out;
    missing = expected;
    extra.clear();
    try {
      auto doc = extract_json(reply);
      if (!doc.is_object()) throw ParseError("designer reply is not an object");
      for (auto it = doc.begin(); it != doc.end(); ++it) {
        int idx = 0;
        try {
          std::size_t used = 0;
          idx = std::stoi(it.key(), &used);
          if (used != it.key().size()) throw ParseError("bad key");
        } catch (const std::exception&) {
          throw ParseError("designer key '" + it.key() + "' is not a grid index");
        }
        std::string text = it.value().is_string() ? detail::trim(it.value().get<std::string>()) : std::string{};
        if (!expected.contains(idx)) {
          extra.insert(idx);
        } else if (!text.empty()) {
          missing.erase(idx);
          out[idx] = GridDescription{idx, std::move(text)};
        }
      }
    } catch (const ParseError&) {
      missing = expected;
      continue;
    }
    if (missing.empty() && extra.empty()) return out;
  }
  throw DesignValidationError(district.id, missing, extra);
}

/// Local design for every district; the union covers every occupied tile.
/// Districts are designed concurrently when `parallel` is set.
inline DescriptionMap design_city(ModelHub& hub, const CityLayout& layout, const std::string& prompt,
                                  const PlannerConfig& cfg = {}, bool parallel = true) {
  std::vector<std::future<DescriptionMap>> jobs;
  std::vector<DescriptionMap> results;
  for (const auto& [id, district] : layout.districts()) {
    if (parallel) {
      jobs.push_back(std::async(std::launch::async, [&hub, &layout, &district, &prompt, &cfg] {
        return local_design(hub, layout, district, prompt, cfg.retries);
      }));
    } else {
      results.push_back(local_design(hub, layout, district, prompt, cfg.retries));
    }
  }
  for (auto& j : jobs) results.push_back(j.get());
  DescriptionMap all;
  for (auto& r : results) all.merge(r);
  std::set<int> have;
  for (const auto& [idx, d] : all) have.insert(idx);
  const auto tiles = layout.tile_indices();
  if (have != std::set<int>(tiles.begin(), tiles.end())) throw Error("design does not cover every tile");
  return all;
}

}  // namespace gridcity
