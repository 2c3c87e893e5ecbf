#pragma once

// PNG images as opaque byte buffers, plus the few raster operations the
// engine needs: encode/decode, text tags and nearest-neighbour board composition.

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gridcity/errors.hpp"

namespace gridcity {

using Bytes = std::vector<std::uint8_t>;

/// Encoded PNG. All images move through the engine in this form.
struct Image {
  Bytes png;

  bool empty() const { return png.empty(); }
  bool operator==(const Image&) const = default;
};

/// Decoded 8-bit RGBA pixels.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgba;

  Raster() = default;
  Raster(int w, int h, std::array<std::uint8_t, 4> fill = {255, 255, 255, 255})
      : width(w), height(h), rgba(static_cast<std::size_t>(w) * h * 4) {
    for (std::size_t i = 0; i < rgba.size(); i += 4) std::copy(fill.begin(), fill.end(), rgba.begin() + i);
  }

  std::uint8_t* at(int x, int y) { return rgba.data() + (static_cast<std::size_t>(y) * width + x) * 4; }
  const std::uint8_t* at(int x, int y) const {
    return rgba.data() + (static_cast<std::size_t>(y) * width + x) * 4;
  }
};

inline Image encode_png(const Raster& raster) {
  if (raster.width <= 0 || raster.height <= 0) throw Error("cannot encode an empty raster");
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(raster.width);
  img.height = static_cast<png_uint_32>(raster.height);
  img.format = PNG_FORMAT_RGBA;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, raster.rgba.data(), 0, nullptr))
    throw Error(std::string("png encode failed: ") + img.message);
  Image out;
  out.png.resize(size);
  if (!png_image_write_to_memory(&img, out.png.data(), &size, 0, raster.rgba.data(), 0, nullptr))
    throw Error(std::string("png encode failed: ") + img.message);
  out.png.resize(size);
  return out;
}

inline Raster decode_png(const Image& image) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, image.png.data(), image.png.size()))
    throw ParseError(std::string("png decode failed: ") + img.message);
  img.format = PNG_FORMAT_RGBA;
  Raster raster;
  raster.width = static_cast<int>(img.width);
  raster.height = static_cast<int>(img.height);
  raster.rgba.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, raster.rgba.data(), 0, nullptr)) {
    png_image_free(&img);
    throw ParseError(std::string("png decode failed: ") + img.message);
  }
  return raster;
}

namespace detail {

inline std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

inline void write_be32(Bytes& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline constexpr std::array<std::uint8_t, 8> kPngSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

}  // namespace detail

/// Inserts a tEXt chunk before IEND.
inline Image with_text_tag(const Image& image, std::string_view key, std::string_view value) {
  const Bytes& png = image.png;
  if (png.size() < 8 + 12 || !std::equal(detail::kPngSignature.begin(), detail::kPngSignature.end(), png.begin()))
    throw ParseError("not a PNG stream");
  std::size_t pos = 8;
  while (pos + 12 <= png.size()) {
    std::uint32_t len = detail::read_be32(&png[pos]);
    if (std::memcmp(&png[pos + 4], "IEND", 4) == 0) break;
    pos += 12 + len;
  }
  if (pos + 12 > png.size()) throw ParseError("PNG stream has no IEND chunk");

  Bytes chunk;
  chunk.insert(chunk.end(), {'t', 'E', 'X', 't'});
  chunk.insert(chunk.end(), key.begin(), key.end());
  chunk.push_back(0);
  chunk.insert(chunk.end(), value.begin(), value.end());
  Bytes out(png.begin(), png.begin() + static_cast<std::ptrdiff_t>(pos));
  detail::write_be32(out, static_cast<std::uint32_t>(chunk.size() - 4));
  out.insert(out.end(), chunk.begin(), chunk.end());
  detail::write_be32(out, static_cast<std::uint32_t>(crc32(0, chunk.data(), static_cast<uInt>(chunk.size()))));
  out.insert(out.end(), png.begin() + static_cast<std::ptrdiff_t>(pos), png.end());
  return Image{std::move(out)};
}

/// Value of the last tEXt chunk named `key`.
inline std::optional<std::string> text_tag(const Image& image, std::string_view key) {
  const Bytes& png = image.png;
  if (png.size() < 8) return std::nullopt;
  std::optional<std::string> found;
  std::size_t pos = 8;
  while (pos + 12 <= png.size()) {
    std::uint32_t len = detail::read_be32(&png[pos]);
    if (pos + 12 + len > png.size()) break;
    if (std::memcmp(&png[pos + 4], "tEXt", 4) == 0) {
      std::string_view data(reinterpret_cast<const char*>(&png[pos + 8]), len);
      auto nul = data.find('\0');
      if (nul != std::string_view::npos && data.substr(0, nul) == key)
        found = std::string(data.substr(nul + 1));
    }
    pos += 12 + len;
  }
  return found;
}

/// Nearest-neighbour resample of `src` into the square at (x0, y0) of side `size`.
inline void blit_scaled(Raster& dst, const Raster& src, int x0, int y0, int size) {
  if (src.width <= 0 || src.height <= 0) return;
  for (int y = 0; y < size; ++y) {
    int sy = y * src.height / size;
    for (int x = 0; x < size; ++x) {
      int sx = x * src.width / size;
      int dx = x0 + x, dy = y0 + y;
      if (dx < 0 || dy < 0 || dx >= dst.width || dy >= dst.height) continue;
      std::memcpy(dst.at(dx, dy), src.at(sx, sy), 4);
    }
  }
}

}  // namespace gridcity
