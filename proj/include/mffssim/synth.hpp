#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "mffssim/error.hpp"
#include "mffssim/focus.hpp"
#include "mffssim/focus_map.hpp"
#include "mffssim/image.hpp"

namespace mffssim {

/// Truncated Gaussian blur, radius ceil(3 sigma), replicate padding.
struct BlurSpec {
  double sigma = 2.0;

  std::size_t radius() const { return static_cast<std::size_t>(std::ceil(3.0 * sigma)); }

  std::vector<double> kernel() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("blur sigma must be positive");
    const std::size_t r = radius();
    std::vector<double> k(2 * r + 1);
    double sum = 0;
    for (std::size_t i = 0; i < k.size(); ++i) {
      const double d = static_cast<double>(i) - static_cast<double>(r);
      k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
      sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
  }
};

inline Image gaussian_blur(const Image& img, const BlurSpec& spec) {
  const std::vector<double> k = spec.kernel();
  const auto r = static_cast<std::ptrdiff_t>(spec.radius());
  const auto h = static_cast<std::ptrdiff_t>(img.height());
  const auto w = static_cast<std::ptrdiff_t>(img.width());
  const std::size_t channels = img.channels();

  Image tmp(img.height(), img.width(), channels);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        double acc = 0;
        for (std::ptrdiff_t d = -r; d <= r; ++d) {
          const auto xs = std::clamp<std::ptrdiff_t>(x + d, 0, w - 1);
          acc += k[static_cast<std::size_t>(d + r)] * img(y, xs, c);
        }
        tmp(y, x, c) = acc;
      }
    }
  }
  Image out(img.height(), img.width(), channels);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        double acc = 0;
        for (std::ptrdiff_t d = -r; d <= r; ++d) {
          const auto ys = std::clamp<std::ptrdiff_t>(y + d, 0, h - 1);
          acc += k[static_cast<std::size_t>(d + r)] * tmp(ys, x, c);
        }
        out(y, x, c) = acc;
      }
    }
  }
  out.clamp_unit();
  return out;
}

namespace detail {

inline Image binarize(const Image& mask) {
  if (mask.channels() != 1) throw ShapeError("masks must be single-channel");
  Image out = mask;
  for (double& v : out.data()) v = v >= 0.5 ? 1.0 : 0.0;
  return out;
}

inline void require_mask_for(const Image& img, const Image& mask) {
  if (mask.height() != img.height() || mask.width() != img.width()) {
    throw ShapeError("mask " + mask.shape_string() + " does not match image " + img.shape_string());
  }
}

// alpha (single-channel) times img, broadcast over channels.
inline Image matte(const Image& img, const Image& alpha, bool complement) {
  Image out(img.height(), img.width(), img.channels());
  const std::size_t c = img.channels();
  auto src = img.data();
  auto a = alpha.data();
  auto dst = out.data();
  for (std::size_t j = 0; j < dst.size(); ++j) {
    const double m = complement ? 1.0 - a[j / c] : a[j / c];
    dst[j] = m * src[j];
  }
  return out;
}

}  // namespace detail

/// Two-source defocus pair built by alpha-matte compositing.
struct SynthPair {
  Image first;        ///< foreground in focus
  Image second;       ///< background in focus, with defocus spread
  FocusMap pixel_map; ///< per pixel: 0 where `first` is sharp, 1 elsewhere
  Image reference;
  Image blurred_matte;
};

/// With clear matte aC = mask and blurred matte aB = blur(aC, fg):
///   FG^C = aC img, BG^C = (1 - aC) img, FG^B = blur(FG^C, fg), BG^B = blur(BG^C, bg)
///   first  = FG^C + (1 - aC) BG^B
///   second = FG^B + (1 - aB) BG^C
inline SynthPair synthesize_pair(const Image& all_in_focus, const Image& mask,
                                 const BlurSpec& fg_spec = {}, const BlurSpec& bg_spec = {}) {
  detail::require_mask_for(all_in_focus, mask);
  const Image alpha_clear = detail::binarize(mask);
  const Image alpha_blur = gaussian_blur(alpha_clear, fg_spec);

  const Image fg_clear = detail::matte(all_in_focus, alpha_clear, false);
  const Image bg_clear = detail::matte(all_in_focus, alpha_clear, true);
  const Image fg_blur = gaussian_blur(fg_clear, fg_spec);
  const Image bg_blur_masked = detail::matte(gaussian_blur(bg_clear, bg_spec), alpha_clear, true);
  const Image bg_clear_spread = detail::matte(bg_clear, alpha_blur, true);

  SynthPair pair{Image(all_in_focus.height(), all_in_focus.width(), all_in_focus.channels()),
                 Image(all_in_focus.height(), all_in_focus.width(), all_in_focus.channels()),
                 FocusMap(1, 1, 2, {0}), all_in_focus, alpha_blur};
  auto x1 = pair.first.data();
  auto x2 = pair.second.data();
  for (std::size_t j = 0; j < x1.size(); ++j) {
    x1[j] = fg_clear.data()[j] + bg_blur_masked.data()[j];
    x2[j] = fg_blur.data()[j] + bg_clear_spread.data()[j];
  }
  pair.first.clamp_unit();
  pair.second.clamp_unit();

  std::vector<std::uint32_t> labels(alpha_clear.size());
  for (std::size_t p = 0; p < labels.size(); ++p) labels[p] = alpha_clear.data()[p] > 0.5 ? 0 : 1;
  pair.pixel_map = FocusMap(mask.height(), mask.width(), 2, std::move(labels));
  return pair;
}

struct SynthStack {
  std::vector<Image> sources;
  FocusMap pixel_map;  ///< per pixel: index of the mask that contains it
  Image reference;
};

/// Source k keeps region k sharp and shows the rest through
/// (1 - a_k) blur((1 - a_k) img), the K-way analogue of `first` above.
inline SynthStack synthesize_stack(const Image& all_in_focus, const std::vector<Image>& masks,
                                   const std::vector<BlurSpec>& specs) {
  if (masks.empty()) throw std::invalid_argument("synthesize_stack needs at least one mask");
  if (specs.size() != masks.size() && specs.size() != 1) {
    throw std::invalid_argument("need one blur spec per mask, or a single shared one");
  }
  std::vector<Image> alphas;
  for (const auto& m : masks) {
    detail::require_mask_for(all_in_focus, m);
    alphas.push_back(detail::binarize(m));
  }
  const std::size_t pixels = all_in_focus.height() * all_in_focus.width();
  std::vector<std::uint32_t> labels(pixels);
  for (std::size_t p = 0; p < pixels; ++p) {
    int hits = 0;
    for (std::size_t k = 0; k < alphas.size(); ++k) {
      if (alphas[k].data()[p] > 0.5) {
        labels[p] = static_cast<std::uint32_t>(k);
        ++hits;
      }
    }
    if (hits != 1) throw std::invalid_argument("masks do not partition the image");
  }

  SynthStack stack{{}, FocusMap(all_in_focus.height(), all_in_focus.width(), masks.size(), labels),
                   all_in_focus};
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    const BlurSpec& spec = specs.size() == 1 ? specs.front() : specs[k];
    const Image rest = detail::matte(all_in_focus, alphas[k], true);
    const Image rest_blur = detail::matte(gaussian_blur(rest, spec), alphas[k], true);
    Image src = detail::matte(all_in_focus, alphas[k], false);
    auto d = src.data();
    for (std::size_t j = 0; j < d.size(); ++j) d[j] += rest_blur.data()[j];
    src.clamp_unit();
    stack.sources.push_back(std::move(src));
  }
  return stack;
}

/// Procedural all-in-focus image plus a partition into focus regions.
/// For two-region scenes masks[0] is the foreground.
struct Scene {
  Image image;
  std::vector<Image> masks;
};

namespace detail {

inline double texture(std::uint64_t seed, std::size_t r, std::size_t c, std::size_t width) {
  return counter_uniform(seed, 7, r * width + c);
}

inline std::vector<Image> two_region_masks(const Image& fg) {
  Image bg = fg;
  for (double& v : bg.data()) v = 1.0 - v;
  return {fg, bg};
}

inline void require_scene_size(std::size_t size) {
  if (size < 8) throw std::invalid_argument("scene size must be at least 8");
}

}  // namespace detail

/// Textured disk (radius 0.3 size) over a differently textured background.
inline Scene disk_scene(std::size_t size, std::uint64_t seed = 1) {
  detail::require_scene_size(size);
  Image img(size, size, 1);
  Image fg(size, size, 1);
  const double centre = (static_cast<double>(size) - 1.0) / 2.0;
  const double radius = 0.3 * static_cast<double>(size);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double dy = static_cast<double>(r) - centre;
      const double dx = static_cast<double>(c) - centre;
      const bool inside = dx * dx + dy * dy <= radius * radius;
      const double u = detail::texture(seed, r, c, size);
      fg(r, c) = inside ? 1.0 : 0.0;
      img(r, c) = inside ? 0.55 + 0.4 * (u - 0.5)
                         : 0.2 + 0.25 * static_cast<double>(c) / static_cast<double>(size) + 0.3 * (u - 0.5);
    }
  }
  return {img, detail::two_region_masks(fg)};
}

/// Vertical stripes of width size/8, alternating foreground and background.
inline Scene stripes_scene(std::size_t size, std::uint64_t seed = 1) {
  detail::require_scene_size(size);
  Image img(size, size, 1);
  Image fg(size, size, 1);
  const std::size_t band = std::max<std::size_t>(size / 8, 1);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const bool inside = (c / band) % 2 == 0;
      const double u = detail::texture(seed, r, c, size);
      fg(r, c) = inside ? 1.0 : 0.0;
      img(r, c) = inside ? 0.35 + 0.3 * u : 0.5 + 0.35 * (u - 0.5);
    }
  }
  return {img, detail::two_region_masks(fg)};
}

/// Block-letter glyphs over a smooth diagonal gradient with fine grain.
inline Scene text_scene(std::size_t size, std::uint64_t seed = 1) {
  detail::require_scene_size(size);
  // 5x3 bitmaps of "M", "F", "F".
  static constexpr const char* glyphs[3][5] = {
      {"X.X", "XXX", "X.X", "X.X", "X.X"},
      {"XXX", "X..", "XX.", "X..", "X.."},
      {"XXX", "X..", "XX.", "X..", "X.."},
  };
  Image img(size, size, 1);
  Image fg(size, size, 1);
  const std::size_t cell = std::max<std::size_t>(size / 14, 1);
  const std::size_t top = (size - 5 * cell) / 2;
  const std::size_t left = (size - 11 * cell) / 2;
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      bool inside = false;
      if (r >= top && r < top + 5 * cell && c >= left && c < left + 11 * cell) {
        const std::size_t gr = (r - top) / cell;
        const std::size_t gc = (c - left) / cell;
        const std::size_t glyph = gc / 4;
        const std::size_t col = gc % 4;
        inside = glyph < 3 && col < 3 && glyphs[glyph][gr][col] == 'X';
      }
      const double u = detail::texture(seed, r, c, size);
      const double ramp = static_cast<double>(r + c) / static_cast<double>(2 * size);
      fg(r, c) = inside ? 1.0 : 0.0;
      img(r, c) = inside ? 0.85 + 0.12 * (u - 0.5) : 0.15 + 0.5 * ramp + 0.2 * (u - 0.5);
    }
  }
  return {img, detail::two_region_masks(fg)};
}

/// Three vertical bands, each its own focus region.
inline Scene thirds_scene(std::size_t size, std::uint64_t seed = 1) {
  detail::require_scene_size(size);
  Image img(size, size, 1);
  std::vector<Image> masks(3, Image(size, size, 1));
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const std::size_t region = std::min<std::size_t>(3 * c / size, 2);
      const double u = detail::texture(seed, r, c, size);
      masks[region](r, c) = 1.0;
      img(r, c) = 0.3 + 0.15 * static_cast<double>(region) + 0.35 * (u - 0.5);
    }
  }
  return {img, masks};
}

inline Scene make_scene(const std::string& name, std::size_t size, std::uint64_t seed = 1) {
  if (name == "disk") return disk_scene(size, seed);
  if (name == "stripes") return stripes_scene(size, seed);
  if (name == "text") return text_scene(size, seed);
  if (name == "thirds") return thirds_scene(size, seed);
  throw std::invalid_argument("unknown scene '" + name + "' (disk, stripes, text, thirds)");
}

}  // namespace mffssim
