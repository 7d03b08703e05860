#include "refvos/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <numeric>

namespace refvos {

std::size_t Mask::area() const {
  return std::accumulate(v.begin(), v.end(), std::size_t{0});
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.string().c_str(), mode));
  if (!f) throw IoError("cannot open '" + path.string() + "'");
  return f;
}

void write_png_8bit(const std::filesystem::path& path, int h, int w, int color_type,
                    const std::vector<std::uint8_t>& bytes, int channels) {
  FilePtr f = open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png write error for '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, w, h, 8, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = const_cast<png_bytep>(bytes.data() + static_cast<size_t>(y) * w * channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void read_png_8bit(const std::filesystem::path& path, int& h, int& w,
                   std::vector<std::uint8_t>& bytes, int want_channels) {
  FilePtr f = open_file(path, "rb");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("png read error for '" + path.string() + "'");
  }
  png_init_io(png, f.get());
  png_read_info(png, info);

  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (want_channels == 3 && (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA))
    png_set_gray_to_rgb(png);
  if (want_channels == 1 && (color_type & PNG_COLOR_MASK_COLOR))
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  png_read_update_info(png, info);

  h = static_cast<int>(height);
  w = static_cast<int>(width);
  bytes.assign(static_cast<size_t>(h) * w * want_channels, 0);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = bytes.data() + static_cast<size_t>(y) * w * want_channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
}

}  // namespace

void write_png_rgb(const std::filesystem::path& path, const Image& img) {
  std::vector<std::uint8_t> bytes(img.rgb.size());
  for (size_t i = 0; i < img.rgb.size(); ++i) {
    float v = img.rgb[i];
    v = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    bytes[i] = static_cast<std::uint8_t>(v * 255.f + 0.5f);
  }
  write_png_8bit(path, img.h, img.w, PNG_COLOR_TYPE_RGB, bytes, 3);
}

Image read_png_rgb(const std::filesystem::path& path) {
  int h = 0, w = 0;
  std::vector<std::uint8_t> bytes;
  read_png_8bit(path, h, w, bytes, 3);
  Image img(h, w);
  for (size_t i = 0; i < bytes.size(); ++i) img.rgb[i] = static_cast<float>(bytes[i]) / 255.f;
  return img;
}

void write_png_mask(const std::filesystem::path& path, const Mask& mask) {
  std::vector<std::uint8_t> bytes(mask.v.size());
  for (size_t i = 0; i < mask.v.size(); ++i) bytes[i] = mask.v[i] ? 255 : 0;
  write_png_8bit(path, mask.h, mask.w, PNG_COLOR_TYPE_GRAY, bytes, 1);
}

Mask read_png_mask(const std::filesystem::path& path) {
  int h = 0, w = 0;
  std::vector<std::uint8_t> bytes;
  read_png_8bit(path, h, w, bytes, 1);
  Mask mask(h, w);
  for (size_t i = 0; i < bytes.size(); ++i) mask.v[i] = bytes[i] > 127 ? 1 : 0;
  return mask;
}

}  // namespace refvos
