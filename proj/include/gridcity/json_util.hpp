#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>

#include <json.hpp>

#include "gridcity/errors.hpp"

namespace gridcity {

/// Pulls the JSON document out of raw model output. Markdown code fences and
/// prose before/after the outermost object are tolerated.
inline nlohmann::ordered_json extract_json(std::string_view text) {
  std::string_view body = text;
  if (auto fence = body.find("```"); fence != std::string_view::npos) {
    auto line_end = body.find('\n', fence);
    auto close = line_end == std::string_view::npos ? std::string_view::npos : body.find("```", line_end);
    if (close != std::string_view::npos) body = body.substr(line_end + 1, close - line_end - 1);
  }
  auto open = body.find_first_of("{[");
  auto close = body.find_last_of("}]");
  if (open == std::string_view::npos || close == std::string_view::npos || close < open)
    throw ParseError("no JSON object found in model output");
  body = body.substr(open, close - open + 1);
  try {
    return nlohmann::ordered_json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON in model output: ") + e.what());
  }
}

namespace detail {

inline void write_canonical(const nlohmann::json& value, std::string& out, int depth) {
  const std::string indent(static_cast<std::size_t>(depth + 1) * 2, ' ');
  const std::string closing(static_cast<std::size_t>(depth) * 2, ' ');
  switch (value.type()) {
    case nlohmann::json::value_t::object: {
      if (value.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = value.begin(); it != value.end(); ++it) {  // std::map: sorted keys
        if (!first) out += ",\n";
        first = false;
        out += indent + nlohmann::json(it.key()).dump() + ": ";
        write_canonical(it.value(), out, depth + 1);
      }
      out += "\n" + closing + "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (value.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (i) out += ",\n";
        out += indent;
        write_canonical(value[i], out, depth + 1);
      }
      out += "\n" + closing + "]";
      return;
    }
    case nlohmann::json::value_t::number_float: {
      double v = value.get<double>();
      if (!std::isfinite(v)) throw Error("non-finite number in canonical JSON");
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", v);
      std::string s = buf;
      if (s == "-0.000000") s = "0.000000";
      out += s;
      return;
    }
    default:
      out += value.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
  }
}

}  // namespace detail

/// Deterministic serialization: sorted keys, two-space indent, every float
/// with exactly 6 fractional digits, trailing newline.
inline std::string canonical_dump(const nlohmann::json& value) {
  std::string out;
  detail::write_canonical(value, out, 0);
  out += '\n';
  return out;
}

}  // namespace gridcity
