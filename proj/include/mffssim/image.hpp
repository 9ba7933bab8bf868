#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mffssim/error.hpp"

namespace mffssim {

/// H x W x C real-valued image stored row-major by (row, column, channel).
///
/// Intensities of decoded images live in [0, 1]. The same type doubles as
/// the accumulator for gradient fields, which are unbounded.
class Image {
 public:
  Image() = default;

  Image(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels),
        data_(height * width * channels, fill) {
    check_dims();
  }

  Image(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data)
      : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_dims();
    if (data_.size() != height_ * width_ * channels_) {
      throw ShapeError("image data length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(height_) + "x" +
                       std::to_string(width_) + "x" + std::to_string(channels_));
    }
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double& operator()(std::size_t row, std::size_t col, std::size_t ch = 0) noexcept {
    return data_[(row * width_ + col) * channels_ + ch];
  }
  double operator()(std::size_t row, std::size_t col, std::size_t ch = 0) const noexcept {
    return data_[(row * width_ + col) * channels_ + ch];
  }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  std::string shape_string() const {
    return std::to_string(height_) + "x" + std::to_string(width_) + "x" + std::to_string(channels_);
  }

  void clamp_unit() noexcept {
    for (double& v : data_) v = std::clamp(v, 0.0, 1.0);
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  void check_dims() const {
    if (height_ == 0 || width_ == 0) throw ShapeError("image must be at least 1x1");
    if (channels_ != 1 && channels_ != 3) {
      throw ShapeError("image must have 1 or 3 channels, got " + std::to_string(channels_));
    }
  }

  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape " + a.shape_string() + " vs " + b.shape_string());
  }
}

/// Integer samples as decoded from a file, before rescaling.
struct RawImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<std::uint16_t> samples;
};

inline double max_code(int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) {
    throw std::invalid_argument("unsupported bit depth " + std::to_string(bit_depth));
  }
  return static_cast<double>((1u << bit_depth) - 1u);
}

/// Rescales integer samples into [0, 1] by dividing by 2^bit_depth - 1.
inline Image normalize(const RawImage& raw, int bit_depth) {
  const double peak = max_code(bit_depth);
  if (raw.samples.empty() || raw.height == 0 || raw.width == 0) {
    throw ShapeError("cannot normalize an empty image");
  }
  if (raw.samples.size() != raw.height * raw.width * raw.channels) {
    throw ShapeError("raw sample count does not match its dimensions");
  }
  std::vector<double> data(raw.samples.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (raw.samples[i] > peak) {
      throw std::invalid_argument("sample value exceeds the range of the bit depth");
    }
    data[i] = raw.samples[i] / peak;
  }
  return Image(raw.height, raw.width, raw.channels, std::move(data));
}

/// Clamps to [0, 1], scales by 2^bit_depth - 1 and rounds half up.
inline RawImage denormalize(const Image& img, int bit_depth) {
  const double peak = max_code(bit_depth);
  RawImage raw{img.height(), img.width(), img.channels(), {}};
  raw.samples.reserve(img.size());
  for (double v : img.data()) {
    raw.samples.push_back(static_cast<std::uint16_t>(std::floor(std::clamp(v, 0.0, 1.0) * peak + 0.5)));
  }
  return raw;
}

/// Rec.601 luminance. Single-channel input is copied unchanged.
inline Image to_grayscale(const Image& img) {
  if (img.channels() == 1) return img;
  Image gray(img.height(), img.width(), 1);
  auto src = img.data();
  auto dst = gray.data();
  for (std::size_t p = 0; p < dst.size(); ++p) {
    const double y = 0.299 * src[3 * p] + 0.587 * src[3 * p + 1] + 0.114 * src[3 * p + 2];
    dst[p] = std::clamp(y, 0.0, 1.0);
  }
  return gray;
}

/// Top-left corner of a patch in image coordinates.
struct PatchOrigin {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

/// Geometry of the square windows enumerated over an image. Only windows
/// lying fully inside the image are part of the grid; patch i sits at grid
/// cell (i / cols, i % cols).
class PatchGrid {
 public:
  PatchGrid(std::size_t image_height, std::size_t image_width, std::size_t window,
            std::size_t stride = 1)
      : image_height_(image_height), image_width_(image_width), window_(window), stride_(stride) {
    if (window == 0) throw std::invalid_argument("window size must be positive");
    if (stride == 0) throw std::invalid_argument("stride must be positive");
    if (window > std::min(image_height, image_width)) {
      throw ShapeError("window " + std::to_string(window) + " exceeds image size " +
                       std::to_string(image_height) + "x" + std::to_string(image_width));
    }
    rows_ = (image_height - window) / stride + 1;
    cols_ = (image_width - window) / stride + 1;
  }

  static PatchGrid for_image(const Image& img, std::size_t window, std::size_t stride = 1) {
    return PatchGrid(img.height(), img.width(), window, stride);
  }

  std::size_t image_height() const noexcept { return image_height_; }
  std::size_t image_width() const noexcept { return image_width_; }
  std::size_t window() const noexcept { return window_; }
  std::size_t stride() const noexcept { return stride_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t patch_count() const noexcept { return rows_ * cols_; }

  PatchOrigin origin(std::size_t index) const {
    if (index >= patch_count()) {
      throw std::out_of_range("patch index " + std::to_string(index) + " out of range [0, " +
                              std::to_string(patch_count()) + ")");
    }
    return {(index / cols_) * stride_, (index % cols_) * stride_};
  }

  bool matches(const Image& img) const noexcept {
    return img.height() == image_height_ && img.width() == image_width_;
  }

  void require_matches(const Image& img) const {
    if (!matches(img)) {
      throw ShapeError("patch grid built for " + std::to_string(image_height_) + "x" +
                       std::to_string(image_width_) + " used with image " + img.shape_string());
    }
  }

  friend bool operator==(const PatchGrid&, const PatchGrid&) = default;

 private:
  std::size_t image_height_;
  std::size_t image_width_;
  std::size_t window_;
  std::size_t stride_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

/// C*W^2 values of one window in patch-local (row, col, channel) order.
struct PatchVector {
  std::vector<double> values;
  PatchOrigin origin;
};

namespace detail {

// Calls fn(image_offset, patch_offset, run_length) for every contiguous
// row segment of the window at `origin`.
template <typename Fn>
void for_each_patch_row(const PatchGrid& grid, std::size_t channels, PatchOrigin origin, Fn&& fn) {
  const std::size_t run = grid.window() * channels;
  for (std::size_t dy = 0; dy < grid.window(); ++dy) {
    fn(((origin.row + dy) * grid.image_width() + origin.col) * channels, dy * run, run);
  }
}

}  // namespace detail

inline PatchVector extract_patch(const Image& img, const PatchGrid& grid, std::size_t index) {
  grid.require_matches(img);
  PatchVector patch{std::vector<double>(grid.window() * grid.window() * img.channels()),
                    grid.origin(index)};
  auto src = img.data();
  detail::for_each_patch_row(grid, img.channels(), patch.origin,
                             [&](std::size_t at, std::size_t to, std::size_t n) {
                               std::copy_n(src.begin() + at, n, patch.values.begin() + to);
                             });
  return patch;
}

/// Adds the patch back onto its window footprint (the transpose of
/// extract_patch). Overlapping scatters accumulate.
inline void scatter_add(Image& accumulator, const PatchGrid& grid, std::size_t index,
                        std::span<const double> patch) {
  grid.require_matches(accumulator);
  const std::size_t expected = grid.window() * grid.window() * accumulator.channels();
  if (patch.size() != expected) {
    throw ShapeError("patch length " + std::to_string(patch.size()) + " but window needs " +
                     std::to_string(expected));
  }
  auto dst = accumulator.data();
  detail::for_each_patch_row(grid, accumulator.channels(), grid.origin(index),
                             [&](std::size_t at, std::size_t from, std::size_t n) {
                               for (std::size_t j = 0; j < n; ++j) dst[at + j] += patch[from + j];
                             });
}

/// Number of grid windows covering each pixel, as a single-channel image.
inline Image overlap_count(const PatchGrid& grid) {
  Image counts(grid.image_height(), grid.image_width(), 1);
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    for (std::size_t c = 0; c < grid.cols(); ++c) {
      for (std::size_t dy = 0; dy < grid.window(); ++dy) {
        for (std::size_t dx = 0; dx < grid.window(); ++dx) {
          counts(r * grid.stride() + dy, c * grid.stride() + dx) += 1.0;
        }
      }
    }
  }
  return counts;
}

}  // namespace mffssim
