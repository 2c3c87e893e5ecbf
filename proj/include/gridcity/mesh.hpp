#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "gridcity/errors.hpp"
#include "gridcity/image.hpp"

namespace gridcity {

/// Axis-aligned extents of a mesh, in the mesh's own units.
struct BoundingBox {
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;

  bool degenerate() const { return !(dx > 0.0 && dy > 0.0 && dz > 0.0); }
  bool operator==(const BoundingBox&) const = default;
};

/// A binary glTF (GLB) asset and its recorded bounding box.
struct MeshAsset {
  Bytes glb;
  BoundingBox bbox;
};

namespace detail {

inline void append_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t read_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

inline constexpr std::uint32_t kGlbMagic = 0x46546C67;  // "glTF"
inline constexpr std::uint32_t kChunkJson = 0x4E4F534A;
inline constexpr std::uint32_t kChunkBin = 0x004E4942;

}  // namespace detail

/// Axis-aligned box with its footprint centred on the origin and its base at
/// z = 0, packed as a single-mesh GLB.
inline Bytes make_box_glb(const BoundingBox& box) {
  const float hx = static_cast<float>(box.dx / 2), hy = static_cast<float>(box.dy / 2);
  const float h = static_cast<float>(box.dz);
  const std::array<float, 24> positions = {-hx, -hy, 0, hx, -hy, 0, hx, hy, 0, -hx, hy, 0,
                                           -hx, -hy, h, hx, -hy, h, hx, hy, h, -hx, hy, h};
  const std::array<std::uint16_t, 36> indices = {0, 2, 1, 0, 3, 2, 4, 5, 6, 4, 6, 7, 0, 1, 5, 0, 5, 4,
                                                 1, 2, 6, 1, 6, 5, 2, 3, 7, 2, 7, 6, 3, 0, 4, 3, 4, 7};
  Bytes bin(sizeof positions + sizeof indices);
  std::memcpy(bin.data(), positions.data(), sizeof positions);
  std::memcpy(bin.data() + sizeof positions, indices.data(), sizeof indices);
  while (bin.size() % 4) bin.push_back(0);

  nlohmann::json gltf = {
      {"asset", {{"version", "2.0"}, {"generator", "gridcity"}}},
      {"scene", 0},
      {"scenes", {{{"nodes", {0}}}}},
      {"nodes", {{{"mesh", 0}}}},
      {"meshes", {{{"primitives", {{{"attributes", {{"POSITION", 0}}}, {"indices", 1}}}}}}},
      {"buffers", {{{"byteLength", bin.size()}}}},
      {"bufferViews",
       {{{"buffer", 0}, {"byteOffset", 0}, {"byteLength", sizeof positions}, {"target", 34962}},
        {{"buffer", 0}, {"byteOffset", sizeof positions}, {"byteLength", sizeof indices}, {"target", 34963}}}},
      {"accessors",
       {{{"bufferView", 0},
         {"componentType", 5126},
         {"count", 8},
         {"type", "VEC3"},
         {"min", {-hx, -hy, 0.0f}},
         {"max", {hx, hy, h}}},
        {{"bufferView", 1}, {"componentType", 5123}, {"count", 36}, {"type", "SCALAR"}}}},
  };
  std::string text = gltf.dump();
  while (text.size() % 4) text.push_back(' ');

  Bytes out;
  detail::append_u32(out, detail::kGlbMagic);
  detail::append_u32(out, 2);
  detail::append_u32(out, static_cast<std::uint32_t>(12 + 8 + text.size() + 8 + bin.size()));
  detail::append_u32(out, static_cast<std::uint32_t>(text.size()));
  detail::append_u32(out, detail::kChunkJson);
  out.insert(out.end(), text.begin(), text.end());
  detail::append_u32(out, static_cast<std::uint32_t>(bin.size()));
  detail::append_u32(out, detail::kChunkBin);
  out.insert(out.end(), bin.begin(), bin.end());
  return out;
}

/// Reads the JSON chunk of a GLB.
inline nlohmann::json glb_json(const Bytes& glb) {
  if (glb.size() < 20 || detail::read_u32(glb.data()) != detail::kGlbMagic) throw ParseError("not a GLB stream");
  std::uint32_t len = detail::read_u32(&glb[12]);
  if (detail::read_u32(&glb[16]) != detail::kChunkJson || 20 + std::size_t{len} > glb.size())
    throw ParseError("GLB has no leading JSON chunk");
  try {
    return nlohmann::json::parse(glb.begin() + 20, glb.begin() + 20 + len);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("GLB JSON chunk invalid: ") + e.what());
  }
}

/// Extents spanned by every POSITION accessor's min/max (node transforms ignored).
inline BoundingBox glb_bounding_box(const Bytes& glb) {
  const auto doc = glb_json(glb);
  std::array<double, 3> lo{}, hi{};
  lo.fill(std::numeric_limits<double>::infinity());
  hi.fill(-std::numeric_limits<double>::infinity());
  bool any = false;
  for (const auto& mesh : doc.value("meshes", nlohmann::json::array())) {
    for (const auto& prim : mesh.value("primitives", nlohmann::json::array())) {
      if (!prim.contains("attributes") || !prim["attributes"].contains("POSITION")) continue;
      const auto& acc = doc.at("accessors").at(prim["attributes"]["POSITION"].get<std::size_t>());
      if (!acc.contains("min") || !acc.contains("max")) continue;
      for (int i = 0; i < 3; ++i) {
        lo[i] = std::min(lo[i], acc["min"][i].get<double>());
        hi[i] = std::max(hi[i], acc["max"][i].get<double>());
      }
      any = true;
    }
  }
  if (!any) return {};
  return {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]};
}

}  // namespace gridcity
