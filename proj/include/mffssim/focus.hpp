#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mffssim/error.hpp"
#include "mffssim/focus_map.hpp"
#include "mffssim/image.hpp"
#include "mffssim/png_io.hpp"

namespace mffssim {

/// 4-neighbour Laplacian [[0,1,0],[1,-4,1],[0,1,0]] of a single-channel
/// image with replicate padding.
inline Image laplacian_response(const Image& gray) {
  if (gray.channels() != 1) throw ShapeError("laplacian_response needs a single-channel image");
  const std::size_t h = gray.height(), w = gray.width();
  Image out(h, w, 1);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t up = r == 0 ? 0 : r - 1;
    const std::size_t down = r + 1 == h ? r : r + 1;
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t left = c == 0 ? 0 : c - 1;
      const std::size_t right = c + 1 == w ? c : c + 1;
      out(r, c) = gray(up, c) + gray(down, c) + gray(r, left) + gray(r, right) - 4.0 * gray(r, c);
    }
  }
  return out;
}

/// Sum of squared Laplacian responses over the footprint of patch `index`.
inline double laplacian_energy(const Image& response, const PatchGrid& grid, std::size_t index) {
  if (response.channels() != 1) throw ShapeError("laplacian_energy needs a response image");
  grid.require_matches(response);
  const auto o = grid.origin(index);
  double e = 0;
  for (std::size_t dy = 0; dy < grid.window(); ++dy) {
    for (std::size_t dx = 0; dx < grid.window(); ++dx) {
      const double v = response(o.row + dy, o.col + dx);
      e += v * v;
    }
  }
  return e;
}

/// Picks, per patch, the source with the largest Laplacian energy of its
/// grayscale conversion. Ties go to the smallest source index.
inline FocusMap detect_focus_map(std::span<const Image> sources, const PatchGrid& grid) {
  if (sources.size() < 2) throw std::invalid_argument("focus detection needs at least two sources");
  for (const auto& s : sources) require_same_shape(s, sources.front(), "detect_focus_map");
  grid.require_matches(sources.front());

  std::vector<Image> responses;
  responses.reserve(sources.size());
  for (const auto& s : sources) responses.push_back(laplacian_response(to_grayscale(s)));

  std::vector<std::uint32_t> selection(grid.patch_count(), 0);
  for (std::size_t i = 0; i < grid.patch_count(); ++i) {
    double best = laplacian_energy(responses[0], grid, i);
    for (std::size_t k = 1; k < responses.size(); ++k) {
      const double e = laplacian_energy(responses[k], grid, i);
      if (e > best) {
        best = e;
        selection[i] = static_cast<std::uint32_t>(k);
      }
    }
  }
  return FocusMap(grid.rows(), grid.cols(), sources.size(), std::move(selection));
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Counter-based stream: the value at (seed, stream, index) does not depend
// on evaluation order.
inline std::uint64_t counter_bits(std::uint64_t seed, std::uint64_t stream,
                                  std::uint64_t index) noexcept {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

inline double counter_uniform(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t index) noexcept {
  return static_cast<double>(counter_bits(seed, stream, index) >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Flips each entry independently with probability p. With two sources the
/// selection swaps; with more it moves uniformly to one of the others.
inline FocusMap corrupt_map(const FocusMap& map, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("corruption probability must be in [0, 1]");
  FocusMap out = map;
  const std::size_t k = map.source_count();
  if (k < 2) return out;
  for (std::size_t i = 0; i < map.patch_count(); ++i) {
    if (!(detail::counter_uniform(seed, 0, i) < p)) continue;
    const auto current = map.selected(i);
    auto pick = static_cast<std::uint32_t>(detail::counter_bits(seed, 1, i) % (k - 1));
    if (pick >= current) ++pick;
    out.select(i, pick);
  }
  return out;
}

/// Gray level used for source k in a focus-map PNG: k * floor(255 / (K-1)).
inline unsigned map_level_step(std::size_t sources) {
  if (sources < 2) return 0;
  if (sources > 256) throw std::invalid_argument("focus-map PNGs hold at most 256 sources");
  return 255u / static_cast<unsigned>(sources - 1);
}

inline void save_map(const std::filesystem::path& path, const FocusMap& map) {
  const unsigned step = map_level_step(map.source_count());
  RawImage raw{map.rows(), map.cols(), 1, std::vector<std::uint16_t>(map.patch_count())};
  for (std::size_t i = 0; i < map.patch_count(); ++i) {
    raw.samples[i] = static_cast<std::uint16_t>(map.selected(i) * step);
  }
  write_png_raw(path, raw);
}

/// Decodes a focus-map PNG of any size by nearest-level quantization.
inline FocusMap load_map(const std::filesystem::path& path, std::size_t sources) {
  if (sources < 2) throw std::invalid_argument("focus maps need at least two sources");
  const unsigned step = map_level_step(sources);
  const DecodedPng png = read_png_raw(path);
  if (png.raw.channels != 1) throw ShapeError(path.string() + ": focus map must be grayscale");
  std::vector<std::uint32_t> selection(png.raw.samples.size());
  for (std::size_t i = 0; i < selection.size(); ++i) {
    unsigned v = png.raw.samples[i];
    if (png.bit_depth == 16) v = (v + 128u) / 257u;
    const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(v) / step + 0.5));
    if (k >= sources) {
      throw std::invalid_argument(path.string() + ": pixel level " + std::to_string(v) +
                                  " does not map to any of " + std::to_string(sources) + " sources");
    }
    selection[i] = static_cast<std::uint32_t>(k);
  }
  return FocusMap(png.raw.height, png.raw.width, sources, std::move(selection));
}

/// Loads a focus map and checks it against the patch grid.
inline FocusMap load_map(const std::filesystem::path& path, const PatchGrid& grid,
                         std::size_t sources) {
  FocusMap map = load_map(path, sources);
  map.require_matches(grid);
  return map;
}

/// Pixel-resolution label map -> patch map, sampling each window's centre
/// pixel (upper-left of the centre for even windows).
inline FocusMap patch_map_from_pixels(const FocusMap& pixels, const PatchGrid& grid) {
  if (pixels.rows() != grid.image_height() || pixels.cols() != grid.image_width()) {
    throw ShapeError("pixel map size does not match the image");
  }
  const std::size_t half = (grid.window() - 1) / 2;
  std::vector<std::uint32_t> selection(grid.patch_count());
  for (std::size_t i = 0; i < grid.patch_count(); ++i) {
    const auto o = grid.origin(i);
    selection[i] = pixels.selected(o.row + half, o.col + half);
  }
  return FocusMap(grid.rows(), grid.cols(), pixels.source_count(), std::move(selection));
}

/// Patch map -> pixel map: each pixel takes the selection of the patch whose
/// centre is nearest.
inline FocusMap rasterize_map(const FocusMap& map, const PatchGrid& grid) {
  map.require_matches(grid);
  const double centre = (static_cast<double>(grid.window()) - 1.0) / 2.0;
  const double stride = static_cast<double>(grid.stride());
  auto nearest = [&](std::size_t pixel, std::size_t cells) {
    const double v = std::floor((static_cast<double>(pixel) - centre) / stride + 0.5);
    return static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(cells - 1)));
  };
  std::vector<std::uint32_t> labels(grid.image_height() * grid.image_width());
  for (std::size_t r = 0; r < grid.image_height(); ++r) {
    const std::size_t pr = nearest(r, grid.rows());
    for (std::size_t c = 0; c < grid.image_width(); ++c) {
      labels[r * grid.image_width() + c] = map.selected(pr, nearest(c, grid.cols()));
    }
  }
  return FocusMap(grid.image_height(), grid.image_width(), map.source_count(), std::move(labels));
}

}  // namespace mffssim
