#include <gtest/gtest.h>

#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "mffssim/png_io.hpp"
#include "oracles.hpp"

using namespace mffssim;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir = fs::temp_directory_path() / "mffssim_png_test";
  fs::create_directories(dir);
  return dir;
}

// Minimal 16-bit grayscale writer, independent of the library's writer.
void write_gray16(const fs::path& path, std::size_t h, std::size_t w, const std::vector<std::uint16_t>& v) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  ASSERT_NE(f, nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_init_io(png, f);
  png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(2 * w);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      row[2 * c] = static_cast<png_byte>(v[r * w + c] >> 8);
      row[2 * c + 1] = static_cast<png_byte>(v[r * w + c] & 0xff);
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(f);
}

}  // namespace

TEST(Png, EightBitRoundTrip) {
  std::mt19937_64 rng(2);
  for (std::size_t channels : {1u, 3u}) {
    RawImage raw{5, 7, channels, {}};
    for (std::size_t i = 0; i < 5 * 7 * channels; ++i) raw.samples.push_back(static_cast<std::uint16_t>(rng() % 256));
    const fs::path path = temp_dir() / ("rt" + std::to_string(channels) + ".png");
    write_png(path, normalize(raw, 8));
    const DecodedPng back = read_png_raw(path);
    EXPECT_EQ(back.bit_depth, 8);
    EXPECT_EQ(back.raw.channels, channels);
    EXPECT_EQ(back.raw.samples, raw.samples);
  }
}

TEST(Png, SixteenBitInput) {
  const fs::path path = temp_dir() / "gray16.png";
  write_gray16(path, 2, 2, {0, 65535, 257, 32768});
  const Image img = read_png(path);
  EXPECT_EQ(img.channels(), 1u);
  EXPECT_EQ(img(0, 0), 0.0);
  EXPECT_EQ(img(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(img(1, 0), 1.0 / 255.0);
  EXPECT_DOUBLE_EQ(img(1, 1), 32768.0 / 65535.0);
}

TEST(Png, OutputClampsAndRoundsHalfUp) {
  const Image img(1, 4, 1, std::vector<double>{-0.3, 1.7, 0.5, 0.5 / 255.0});
  const fs::path path = temp_dir() / "round.png";
  write_png(path, img);
  EXPECT_EQ(read_png_raw(path).raw.samples, (std::vector<std::uint16_t>{0, 255, 128, 1}));
}

TEST(Png, Errors) {
  EXPECT_THROW(read_png(temp_dir() / "does_not_exist.png"), IoError);
  const fs::path junk = temp_dir() / "junk.png";
  std::ofstream(junk) << "not a png at all";
  EXPECT_THROW(read_png(junk), IoError);
  EXPECT_THROW(write_png(temp_dir() / "no_such_dir" / "x.png", Image(2, 2, 1)), IoError);
}
