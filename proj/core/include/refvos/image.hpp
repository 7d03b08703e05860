#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "refvos/common.hpp"

namespace refvos {

/// RGB image with values in [0,1], interleaved r,g,b per pixel.
struct Image {
  int h = 0;
  int w = 0;
  std::vector<float> rgb;

  Image() = default;
  Image(int height, int width) : h(height), w(width), rgb(3u * height * width, 0.f) {}

  float& at(int y, int x, int c) { return rgb[3u * (static_cast<size_t>(y) * w + x) + c]; }
  float at(int y, int x, int c) const { return rgb[3u * (static_cast<size_t>(y) * w + x) + c]; }

  bool operator==(const Image& o) const { return h == o.h && w == o.w && rgb == o.rgb; }
};

/// Binary mask, values in {0,1}.
struct Mask {
  int h = 0;
  int w = 0;
  std::vector<std::uint8_t> v;

  Mask() = default;
  Mask(int height, int width) : h(height), w(width), v(static_cast<size_t>(height) * width, 0) {}

  std::uint8_t& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
  std::uint8_t at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
  std::size_t area() const;

  bool operator==(const Mask& o) const { return h == o.h && w == o.w && v == o.v; }
};

void write_png_rgb(const std::filesystem::path& path, const Image& img);
Image read_png_rgb(const std::filesystem::path& path);

/// Mask PNGs are single channel: 0 = background, 255 = object.
void write_png_mask(const std::filesystem::path& path, const Mask& mask);
/// Gray values are binarized at pixel value > 127.
Mask read_png_mask(const std::filesystem::path& path);

}  // namespace refvos
