#pragma once

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "mffssim/error.hpp"
#include "mffssim/image.hpp"

namespace mffssim {

/// Decoded PNG samples together with their bit depth (8 or 16).
struct DecodedPng {
  RawImage raw;
  int bit_depth = 8;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

}  // namespace detail

/// Reads an 8- or 16-bit PNG. Palette and sub-byte gray are expanded to
/// 8 bit; alpha is discarded. Result has 1 (gray) or 3 (RGB) channels.
inline DecodedPng read_png_raw(const std::filesystem::path& path) {
  auto file = detail::open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(path.string() + " is not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }

  DecodedPng out;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("failed to decode " + path.string());
  }

  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color_type = png_get_color_type(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int channels = png_get_channels(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);

  buffer.resize(row_bytes * height);
  rows.resize(height);
  for (png_uint_32 r = 0; r < height; ++r) rows[r] = buffer.data() + r * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3) {
    throw IoError(path.string() + ": unsupported channel layout");
  }
  out.bit_depth = bit_depth;
  out.raw.height = height;
  out.raw.width = width;
  out.raw.channels = static_cast<std::size_t>(channels);
  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  out.raw.samples.resize(count);
  if (bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      out.raw.samples[i] = static_cast<std::uint16_t>((buffer[2 * i] << 8) | buffer[2 * i + 1]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) out.raw.samples[i] = buffer[i];
  }
  return out;
}

inline Image read_png(const std::filesystem::path& path) {
  const DecodedPng decoded = read_png_raw(path);
  return normalize(decoded.raw, decoded.bit_depth);
}

/// Writes 8-bit samples as a gray or RGB PNG.
inline void write_png_raw(const std::filesystem::path& path, const RawImage& raw) {
  if (raw.channels != 1 && raw.channels != 3) throw ShapeError("PNG output needs 1 or 3 channels");
  std::vector<png_byte> bytes(raw.samples.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if (raw.samples[i] > 255) throw std::invalid_argument("8-bit PNG sample out of range");
    bytes[i] = static_cast<png_byte>(raw.samples[i]);
  }

  auto file = detail::open_file(path, "wb");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  std::vector<png_bytep> rows(raw.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(raw.width), static_cast<png_uint_32>(raw.height),
               8, raw.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = raw.width * raw.channels;
  for (std::size_t r = 0; r < raw.height; ++r) rows[r] = bytes.data() + r * stride;
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw IoError("failed to flush " + path.string());
}

/// Clamps to [0, 1], scales by 255, rounds half up and writes 8-bit PNG.
inline void write_png(const std::filesystem::path& path, const Image& img) {
  write_png_raw(path, denormalize(img, 8));
}

}  // namespace mffssim
