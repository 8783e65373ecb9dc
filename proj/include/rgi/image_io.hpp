#pragma once

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "rgi/image.hpp"

namespace rgi {

namespace detail {

struct PngReadCtx {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngReadCtx() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

struct PngWriteCtx {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngWriteCtx() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    if (fp) std::fclose(fp);
  }
};

// Decode any PNG to 8-bit interleaved rows with `want_channels` (1 or 3).
inline std::vector<uint8_t> read_png_8bit(const std::string& path, int want_channels,
                                          int& h, int& w) {
  PngReadCtx ctx;
  ctx.fp = std::fopen(path.c_str(), "rb");
  if (!ctx.fp) throw io_error("cannot open PNG for reading: " + path);
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.png || !ctx.info) throw io_error("libpng init failed");
  if (setjmp(png_jmpbuf(ctx.png))) throw io_error("PNG decode failed: " + path);
  png_init_io(ctx.png, ctx.fp);
  png_read_info(ctx.png, ctx.info);

  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(ctx.png, ctx.info, &width, &height, &bit_depth, &color_type, nullptr,
               nullptr, nullptr);
  if (bit_depth == 16) png_set_strip_16(ctx.png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
  png_set_strip_alpha(ctx.png);
  if (want_channels == 3) {
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
      png_set_gray_to_rgb(ctx.png);
  } else {
    if (color_type == PNG_COLOR_TYPE_RGB || color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
        color_type == PNG_COLOR_TYPE_PALETTE)
      png_set_rgb_to_gray_fixed(ctx.png, 1, -1, -1);
  }
  png_read_update_info(ctx.png, ctx.info);

  h = static_cast<int>(height);
  w = static_cast<int>(width);
  std::vector<uint8_t> rows(static_cast<size_t>(h) * w * want_channels);
  std::vector<png_bytep> row_ptrs(h);
  for (int y = 0; y < h; ++y)
    row_ptrs[y] = rows.data() + static_cast<size_t>(y) * w * want_channels;
  png_read_image(ctx.png, row_ptrs.data());
  png_read_end(ctx.png, nullptr);
  return rows;
}

inline void write_png_8bit(const std::string& path, const uint8_t* rows, int h, int w,
                           int channels) {
  PngWriteCtx ctx;
  ctx.fp = std::fopen(path.c_str(), "wb");
  if (!ctx.fp) throw io_error("cannot open PNG for writing: " + path);
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.png || !ctx.info) throw io_error("libpng init failed");
  if (setjmp(png_jmpbuf(ctx.png))) throw io_error("PNG encode failed: " + path);
  png_init_io(ctx.png, ctx.fp);
  png_set_IHDR(ctx.png, ctx.info, w, h, 8,
               channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);
  std::vector<png_bytep> row_ptrs(h);
  for (int y = 0; y < h; ++y)
    row_ptrs[y] = const_cast<png_bytep>(rows + static_cast<size_t>(y) * w * channels);
  png_write_image(ctx.png, row_ptrs.data());
  png_write_end(ctx.png, nullptr);
}

}  // namespace detail

inline Image read_image_png(const std::string& path) {
  int h = 0, w = 0;
  const auto rows = detail::read_png_8bit(path, 3, h, w);
  Image img(h, w);
  const int hw = h * w;
  for (int i = 0; i < hw; ++i)
    for (int c = 0; c < 3; ++c)
      img.data[c * hw + i] = static_cast<float>(rows[i * 3 + c]) / 255.f;
  return img;
}

inline void write_image_png(const std::string& path, const Image& img) {
  const int hw = img.pixels();
  std::vector<uint8_t> rows(static_cast<size_t>(hw) * 3);
  for (int i = 0; i < hw; ++i)
    for (int c = 0; c < 3; ++c) {
      const float v = std::min(1.f, std::max(0.f, img.data[c * hw + i]));
      rows[i * 3 + c] = static_cast<uint8_t>(std::lround(v * 255.f));
    }
  detail::write_png_8bit(path, rows.data(), img.height, img.width, 3);
}

// Label masks are single-channel PNGs whose pixel values are category ids.
inline LabelMask read_mask_png(const std::string& path, int num_categories = 12) {
  int h = 0, w = 0;
  const auto rows = detail::read_png_8bit(path, 1, h, w);
  LabelMask m(h, w);
  m.labels.assign(rows.begin(), rows.end());
  m.validate(num_categories);
  return m;
}

inline void write_mask_png(const std::string& path, const LabelMask& mask) {
  detail::write_png_8bit(path, mask.labels.data(), mask.height, mask.width, 1);
}

// Boolean masks are written as 0/255 single-channel PNGs.
inline void write_bitmask_png(const std::string& path, const MismatchMask& m) {
  std::vector<uint8_t> rows(m.bits.size());
  for (size_t i = 0; i < m.bits.size(); ++i) rows[i] = m.bits[i] ? 255 : 0;
  detail::write_png_8bit(path, rows.data(), m.height, m.width, 1);
}

inline MismatchMask read_bitmask_png(const std::string& path) {
  int h = 0, w = 0;
  const auto rows = detail::read_png_8bit(path, 1, h, w);
  MismatchMask m(h, w);
  for (size_t i = 0; i < rows.size(); ++i) m.bits[i] = rows[i] >= 128 ? 1 : 0;
  return m;
}

}  // namespace rgi
