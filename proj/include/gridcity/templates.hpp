#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

#include "gridcity/embedded_templates.hpp"
#include "gridcity/errors.hpp"

namespace gridcity {

using Variables = std::map<std::string, std::string>;

/// Template ids used by the engine.
namespace tmpl {
inline constexpr std::string_view kGlobalPlanner = "global_planner";
inline constexpr std::string_view kLocalDesigner = "local_designer";
inline constexpr std::string_view kGenerateImage = "generate_image";
inline constexpr std::string_view kRefineImage = "refine_image";
inline constexpr std::string_view kEvaluateImage = "evaluate_image";
inline constexpr std::string_view kExpansion = "expansion";
inline constexpr std::string_view kJudgeVisual = "judge_visual";
inline constexpr std::string_view kAlignmentQuery = "alignment_query";
inline constexpr std::string_view kReferenceDistill = "reference_distill";
}  // namespace tmpl

/// Names of the `{identifier}` placeholders in `text`. Braces that do not
/// enclose a bare lowercase identifier (JSON examples, `<...>` hints) are
/// literal text.
inline std::set<std::string> placeholders_of(std::string_view text) {
  std::set<std::string> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    std::size_t j = i + 1;
    while (j < text.size() && ((text[j] >= 'a' && text[j] <= 'z') || text[j] == '_' ||
                               (text[j] >= '0' && text[j] <= '9')))
      ++j;
    if (j > i + 1 && j < text.size() && text[j] == '}') out.emplace(text.substr(i + 1, j - i - 1));
  }
  return out;
}

/// Substitutes every placeholder; an unbound one is a TemplateError. Values are
/// inserted verbatim and never re-scanned.
inline std::string render_template(std::string_view text, const Variables& vars) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] == '{') {
      std::size_t j = i + 1;
      while (j < text.size() && ((text[j] >= 'a' && text[j] <= 'z') || text[j] == '_' ||
                                 (text[j] >= '0' && text[j] <= '9')))
        ++j;
      if (j > i + 1 && j < text.size() && text[j] == '}') {
        std::string name(text.substr(i + 1, j - i - 1));
        auto it = vars.find(name);
        if (it == vars.end()) throw TemplateError("unbound placeholder {" + name + "}");
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out += text[i++];
  }
  return out;
}

/// Versioned prompt templates. Ships with the built-in set; a directory of
/// `<id>.v<N>.txt` files overrides individual entries (highest N wins).
class TemplateStore {
 public:
  TemplateStore() : templates_(embedded_templates()) {}

  static TemplateStore from_directory(const std::filesystem::path& dir) {
    TemplateStore store;
    std::map<std::string, int> versions;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
      std::string stem = entry.path().stem().string();  // id.vN
      auto dot = stem.rfind(".v");
      if (dot == std::string::npos) continue;
      std::string id = stem.substr(0, dot);
      int version = 0;
      try {
        version = std::stoi(stem.substr(dot + 2));
      } catch (const std::exception&) {
        continue;
      }
      if (versions.contains(id) && versions[id] >= version) continue;
      std::ifstream in(entry.path(), std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      versions[id] = version;
      store.templates_[id] = ss.str();
    }
    return store;
  }

  bool contains(std::string_view id) const { return templates_.contains(std::string(id)); }

  const std::string& text(std::string_view id) const {
    auto it = templates_.find(std::string(id));
    if (it == templates_.end()) throw TemplateError("unknown template '" + std::string(id) + "'");
    return it->second;
  }

  std::string render(std::string_view id, const Variables& vars) const {
    return render_template(text(id), vars);
  }

 private:
  std::map<std::string, std::string> templates_;
};

}  // namespace gridcity
