#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mffssim/error.hpp"
#include "mffssim/focus_map.hpp"
#include "mffssim/image.hpp"
#include "mffssim/parallel.hpp"
#include "mffssim/report.hpp"

namespace mffssim {

struct SsimConstants {
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;

  void validate() const {
    if (!(c1 > 0.0) || !(c2 > 0.0)) throw std::invalid_argument("SSIM constants must be positive");
  }
};

/// First and second moments of a patch pair plus the four SSIM factors
///   a1 = 2 mx my + C1      b1 = mx^2 + my^2 + C1
///   a2 = 2 cov + C2        b2 = vx + vy + C2
/// Variances use the population convention (divide by the length).
struct PatchStats {
  double mean_x = 0, mean_y = 0;
  double var_x = 0, var_y = 0, cov_xy = 0;
  double a1 = 0, b1 = 0, a2 = 0, b2 = 0;

  double ssim() const noexcept { return (a1 * a2) / (b1 * b2); }
};

/// Read-only window into an image: `rows` runs of `run` contiguous values,
/// consecutive runs `row_stride` apart. A contiguous vector is one run.
struct PatchView {
  const double* base = nullptr;
  std::size_t row_stride = 0;
  std::size_t run = 0;
  std::size_t rows = 0;

  static PatchView contiguous(std::span<const double> v) { return {v.data(), v.size(), v.size(), 1}; }

  static PatchView window(const Image& img, const PatchGrid& grid, PatchOrigin o) {
    return {img.data().data() + (o.row * img.width() + o.col) * img.channels(),
            img.width() * img.channels(), grid.window() * img.channels(), grid.window()};
  }

  std::size_t size() const noexcept { return run * rows; }
};

namespace detail {

inline PatchStats stats(const PatchView& x, const PatchView& y, const SsimConstants& k) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* px = x.base + r * x.row_stride;
    const double* py = y.base + r * y.row_stride;
    for (std::size_t j = 0; j < x.run; ++j) {
      sx += px[j];
      sy += py[j];
    }
  }
  PatchStats s;
  s.mean_x = sx / n;
  s.mean_y = sy / n;
  double vx = 0, vy = 0, cxy = 0;
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* px = x.base + r * x.row_stride;
    const double* py = y.base + r * y.row_stride;
    for (std::size_t j = 0; j < x.run; ++j) {
      const double dx = px[j] - s.mean_x;
      const double dy = py[j] - s.mean_y;
      vx += dx * dx;
      vy += dy * dy;
      cxy += dx * dy;
    }
  }
  s.var_x = vx / n;
  s.var_y = vy / n;
  s.cov_xy = cxy / n;
  s.a1 = 2.0 * s.mean_x * s.mean_y + k.c1;
  s.b1 = s.mean_x * s.mean_x + s.mean_y * s.mean_y + k.c1;
  s.a2 = 2.0 * s.cov_xy + k.c2;
  s.b2 = s.var_x + s.var_y + k.c2;
  return s;
}

inline void require_patch_pair(std::size_t nx, std::size_t ny) {
  if (nx != ny) {
    throw ShapeError("patch lengths differ: " + std::to_string(nx) + " vs " + std::to_string(ny));
  }
  if (nx < 2) throw ShapeError("patches need at least two entries");
}

inline void require_sources(std::span<const Image> sources, const Image& fused,
                            const PatchGrid& grid) {
  if (sources.empty()) throw std::invalid_argument("at least one source image is required");
  for (const auto& s : sources) require_same_shape(s, fused, "source vs fused");
  grid.require_matches(fused);
}

}  // namespace detail

inline PatchStats patch_stats(std::span<const double> x, std::span<const double> y,
                              const SsimConstants& k = {}) {
  detail::require_patch_pair(x.size(), y.size());
  return detail::stats(PatchView::contiguous(x), PatchView::contiguous(y), k);
}

inline double ssim_patch(std::span<const double> x, std::span<const double> y,
                         const SsimConstants& k = {}) {
  return patch_stats(x, y, k).ssim();
}

inline double ssim_patch(const PatchVector& x, const PatchVector& y, const SsimConstants& k = {}) {
  return ssim_patch(x.values, y.values, k);
}

/// SSIM between y and the source patch picked by the one-hot weights.
inline double mff_ssim_patch(std::span<const PatchVector> sources, const PatchVector& y,
                             std::span<const double> weights, const SsimConstants& k = {}) {
  if (weights.size() != sources.size()) {
    throw ShapeError("got " + std::to_string(weights.size()) + " weights for " +
                     std::to_string(sources.size()) + " sources");
  }
  const auto j = one_hot_index(weights);
  for (const auto& s : sources) detail::require_patch_pair(s.values.size(), y.values.size());
  return ssim_patch(sources[j], y, k);
}

/// Mean over all grid patches of SSIM(selected source patch, fused patch).
inline double mff_ssim_index(std::span<const Image> sources, const Image& fused,
                             const FocusMap& map, const PatchGrid& grid,
                             const SsimConstants& k = {}) {
  detail::require_sources(sources, fused, grid);
  map.require_matches(grid);
  if (map.source_count() != sources.size()) {
    throw ShapeError("focus map covers " + std::to_string(map.source_count()) + " sources, got " +
                     std::to_string(sources.size()));
  }
  const std::size_t patches = grid.patch_count();
  const std::size_t threads = thread_count();
  std::vector<double> partial(threads, 0.0);
  parallel_chunks(patches, threads, [&](std::size_t t, std::size_t begin, std::size_t end) {
    double sum = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto o = grid.origin(i);
      sum += detail::stats(PatchView::window(sources[map.selected(i)], grid, o),
                           PatchView::window(fused, grid, o), k)
                 .ssim();
    }
    partial[t] = sum;
  });
  double total = 0;
  for (double p : partial) total += p;
  return total / static_cast<double>(patches);
}

/// Mean patch SSIM between two images over the grid.
inline double global_ssim(const Image& reference, const Image& test, const PatchGrid& grid,
                          const SsimConstants& k = {}) {
  require_same_shape(reference, test, "global_ssim");
  const Image sources[] = {reference};
  return mff_ssim_index(sources, test, FocusMap::uniform(grid, 1), grid, k);
}

inline constexpr double kPsnrCapDb = 100.0;

/// PSNR in dB with peak 1 over all H*W*C entries; identical images give
/// the 100 dB cap.
inline double psnr(const Image& reference, const Image& test) {
  require_same_shape(reference, test, "psnr");
  auto a = reference.data();
  auto b = test.data();
  double sse = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

/// Side length of the uniform window used for the reported "ssim" metric,
/// independent of the fusion window so values compare across runs.
inline constexpr std::size_t kEvalWindow = 7;

inline PatchGrid evaluation_grid(const Image& img) {
  return PatchGrid::for_image(img, std::min({kEvalWindow, img.height(), img.width()}));
}

/// Reference-based scores with stable keys "ssim" and "psnr_db".
inline MetricReport evaluate(const Image& reference, const Image& test) {
  require_same_shape(reference, test, "evaluate");
  MetricReport r;
  r.set("ssim", global_ssim(reference, test, evaluation_grid(reference)));
  r.set("psnr_db", psnr(reference, test));
  return r;
}

}  // namespace mffssim
