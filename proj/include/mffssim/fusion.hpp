#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mffssim/error.hpp"
#include "mffssim/focus.hpp"
#include "mffssim/focus_map.hpp"
#include "mffssim/image.hpp"
#include "mffssim/parallel.hpp"
#include "mffssim/report.hpp"
#include "mffssim/ssim.hpp"

namespace mffssim {

inline constexpr std::size_t kMinWindow = 3;

struct FusionConfig {
  double learning_rate = 1e-3;
  std::size_t max_iters = 1000;
  /// W = round(ratio * M * N), clamped to [3, min(M, N)], unless `window` is set.
  double window_ratio = 5e-5;
  std::optional<std::size_t> window;
  SsimConstants constants;
  double stop_tol = 1e-8;
  /// Divide each pixel's gradient by its patch-overlap count. Not part of
  /// the reference algorithm; off by default.
  bool overlap_normalize = false;
  std::size_t stride = 1;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (max_iters < 1) throw std::invalid_argument("iteration cap must be at least 1");
    if (!(stop_tol >= 0.0)) throw std::invalid_argument("stopping tolerance must be non-negative");
    if (stride < 1) throw std::invalid_argument("stride must be positive");
    if (!window && !(window_ratio > 0.0)) throw std::invalid_argument("window ratio must be positive");
    constants.validate();
  }

  std::size_t resolve_window(std::size_t height, std::size_t width) const {
    const std::size_t limit = std::min(height, width);
    if (limit < kMinWindow) {
      throw ShapeError("image " + std::to_string(height) + "x" + std::to_string(width) +
                       " is smaller than the minimum window of 3");
    }
    if (window) {
      if (*window < kMinWindow || *window > limit) {
        throw ShapeError("window " + std::to_string(*window) + " outside [3, " +
                         std::to_string(limit) + "]");
      }
      return *window;
    }
    const double w = std::round(window_ratio * static_cast<double>(height) * static_cast<double>(width));
    return static_cast<std::size_t>(std::clamp(w, static_cast<double>(kMinWindow), static_cast<double>(limit)));
  }

  PatchGrid grid_for(const Image& img) const {
    return PatchGrid::for_image(img, resolve_window(img.height(), img.width()), stride);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["learning_rate"] = learning_rate;
    j["max_iters"] = max_iters;
    j["window_ratio"] = window_ratio;
    j["window"] = window ? nlohmann::json(*window) : nlohmann::json(nullptr);
    j["c1"] = constants.c1;
    j["c2"] = constants.c2;
    j["stop_tol"] = stop_tol;
    j["overlap_normalize"] = overlap_normalize;
    j["stride"] = stride;
    return j;
  }
};

namespace detail {

// Adds the gradient of SSIM(x, y) w.r.t. y into the
// strided destination. With s = SSIM and n = |y| the gradient is
//   2/(n b1 b2) * [ mx a2 + a1 (x - mx) - s (my b2 + b1 (y - my)) ]
// which vanishes exactly when x == y (a1 == b1, a2 == b2, s == 1).
inline void add_patch_gradient(const PatchView& x, const PatchView& y, const PatchStats& st,
                               double* out, std::size_t out_stride) {
  const double n = static_cast<double>(x.size());
  const double s = st.ssim();
  const double scale = 2.0 / (n * st.b1 * st.b2);
  const double c0 = scale * (st.mean_x * st.a2 - s * st.mean_y * st.b2);
  const double cx = scale * st.a1;
  const double cy = scale * s * st.b1;
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* px = x.base + r * x.row_stride;
    const double* py = y.base + r * y.row_stride;
    double* po = out + r * out_stride;
    for (std::size_t j = 0; j < x.run; ++j) {
      po[j] += c0 + cx * (px[j] - st.mean_x) - cy * (py[j] - st.mean_y);
    }
  }
}

inline void require_fusion_inputs(std::span<const Image> sources, const Image& fused,
                                  const FocusMap& map, const PatchGrid& grid) {
  require_sources(sources, fused, grid);
  map.require_matches(grid);
  if (map.source_count() != sources.size()) {
    throw ShapeError("focus map covers " + std::to_string(map.source_count()) + " sources, got " +
                     std::to_string(sources.size()));
  }
}

}  // namespace detail

/// Gradient of the map-weighted patch SSIM with respect to the fused patch.
inline PatchVector patch_gradient(std::span<const PatchVector> sources, const PatchVector& y,
                                  std::span<const double> weights, const SsimConstants& k = {}) {
  if (weights.size() != sources.size()) {
    throw ShapeError("got " + std::to_string(weights.size()) + " weights for " +
                     std::to_string(sources.size()) + " sources");
  }
  const auto j = one_hot_index(weights);
  for (const auto& s : sources) detail::require_patch_pair(s.values.size(), y.values.size());
  const auto xv = PatchView::contiguous(sources[j].values);
  const auto yv = PatchView::contiguous(y.values);
  PatchVector g{std::vector<double>(y.values.size(), 0.0), y.origin};
  detail::add_patch_gradient(xv, yv, detail::stats(xv, yv, k), g.values.data(), g.values.size());
  return g;
}

/// MFF-SSIM value and its gradient at one fused image.
struct Objective {
  double q = 0;
  Image gradient;
};

/// Q and G = (1/P) sum_i R_i^T grad S_i in a single pass over the patches.
/// Worker threads accumulate into private buffers merged in thread order.
inline Objective evaluate_objective(std::span<const Image> sources, const Image& fused,
                                    const FocusMap& map, const PatchGrid& grid,
                                    const FusionConfig& cfg,
                                    const Image* overlap = nullptr) {
  detail::require_fusion_inputs(sources, fused, map, grid);
  const std::size_t patches = grid.patch_count();
  const double inv_p = 1.0 / static_cast<double>(patches);
  const std::size_t threads = std::min(thread_count(), patches);
  const std::size_t row_stride = fused.width() * fused.channels();

  std::vector<Image> buffers(threads, Image(fused.height(), fused.width(), fused.channels()));
  std::vector<double> partial(threads, 0.0);
  parallel_chunks(patches, threads, [&](std::size_t t, std::size_t begin, std::size_t end) {
    double* g = buffers[t].data().data();
    double sum = 0;
    for (std::size_t i = begin; i < end; ++i) {
      const auto o = grid.origin(i);
      const auto xv = PatchView::window(sources[map.selected(i)], grid, o);
      const auto yv = PatchView::window(fused, grid, o);
      const PatchStats st = detail::stats(xv, yv, cfg.constants);
      sum += st.ssim();
      detail::add_patch_gradient(xv, yv, st,
                                 g + (o.row * fused.width() + o.col) * fused.channels(), row_stride);
    }
    partial[t] = sum;
  });

  Objective result{0.0, std::move(buffers.front())};
  auto g = result.gradient.data();
  for (std::size_t t = 1; t < threads; ++t) {
    auto other = buffers[t].data();
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += other[j];
  }
  for (double& v : g) v *= inv_p;
  if (cfg.overlap_normalize) {
    const Image counts = overlap ? *overlap : overlap_count(grid);
    const std::size_t c = fused.channels();
    auto n = counts.data();
    for (std::size_t j = 0; j < g.size(); ++j) g[j] /= n[j / c];
  }
  double total = 0;
  for (double p : partial) total += p;
  result.q = total / static_cast<double>(patches);
  return result;
}

inline Image full_gradient(std::span<const Image> sources, const Image& fused, const FocusMap& map,
                           const PatchGrid& grid, const FusionConfig& cfg) {
  return evaluate_objective(sources, fused, map, grid, cfg).gradient;
}

inline Image average_image(std::span<const Image> sources) {
  if (sources.empty()) throw std::invalid_argument("no source images");
  Image avg(sources.front().height(), sources.front().width(), sources.front().channels());
  auto dst = avg.data();
  // Running mean: exact when all sources agree at a pixel.
  for (std::size_t i = 0; i < sources.size(); ++i) {
    require_same_shape(sources[i], avg, "average_image");
    auto src = sources[i].data();
    const double n = static_cast<double>(i + 1);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += (src[j] - dst[j]) / n;
  }
  return avg;
}

struct FusionResult {
  Image fused;
  MetricReport report;
};

/// Gradient ascent on the MFF-SSIM index with the focus map held fixed.
/// Starts from `init` or the source average, steps Y += lr * G with
/// clamping to [0, 1], and stops after max_iters updates or once
/// |Q(t) - Q(t-1)| < stop_tol. With a reference, the report also carries
/// "ssim" and "psnr_db" of the result.
inline FusionResult fuse(std::span<const Image> sources, const FocusMap& map,
                         const FusionConfig& cfg, const std::optional<Image>& init = std::nullopt,
                         const Image* reference = nullptr) {
  cfg.validate();
  if (sources.empty()) throw std::invalid_argument("fuse needs at least one source");
  for (const auto& s : sources) require_same_shape(s, sources.front(), "fuse");
  const PatchGrid grid = cfg.grid_for(sources.front());

  FusionResult result;
  result.report.config = cfg.to_json();
  (*result.report.config)["resolved_window"] = grid.window();

  if (sources.size() == 1) {
    result.fused = sources.front();
    result.report.set("Q", 1.0);
    result.report.set("iterations", 0);
    result.report.trace = {1.0};
  } else {
    detail::require_fusion_inputs(sources, sources.front(), map, grid);
    Image y = init ? *init : average_image(sources);
    require_same_shape(y, sources.front(), "initial image");
    y.clamp_unit();

    const std::optional<Image> overlap =
        cfg.overlap_normalize ? std::optional<Image>(overlap_count(grid)) : std::nullopt;
    const Image* overlap_ptr = overlap ? &*overlap : nullptr;

    Objective obj = evaluate_objective(sources, y, map, grid, cfg, overlap_ptr);
    std::vector<double> trace{obj.q};
    std::size_t iterations = 0;
    for (std::size_t t = 1; t <= cfg.max_iters; ++t) {
      auto yd = y.data();
      auto gd = obj.gradient.data();
      for (std::size_t j = 0; j < yd.size(); ++j) {
        yd[j] = std::clamp(yd[j] + cfg.learning_rate * gd[j], 0.0, 1.0);
      }
      const double previous = obj.q;
      obj = evaluate_objective(sources, y, map, grid, cfg, overlap_ptr);
      trace.push_back(obj.q);
      iterations = t;
      if (std::abs(obj.q - previous) < cfg.stop_tol) break;
    }
    result.fused = std::move(y);
    result.report.set("Q", obj.q);
    result.report.set("iterations", static_cast<double>(iterations));
    result.report.trace = std::move(trace);
  }

  if (reference) {
    require_same_shape(*reference, result.fused, "reference");
    const MetricReport scores = evaluate(*reference, result.fused);
    result.report.set("ssim", scores.at("ssim"));
    result.report.set("psnr_db", scores.at("psnr_db"));
  }
  return result;
}

/// Pixel-wise composition Y = M X1 + (1 - M) X2, where M is 1 wherever the
/// two-source pixel map selects source 0.
inline Image addition_fuse(const Image& first, const Image& second, const FocusMap& pixel_map) {
  require_same_shape(first, second, "addition_fuse");
  if (pixel_map.rows() != first.height() || pixel_map.cols() != first.width()) {
    throw ShapeError("pixel map size does not match the sources");
  }
  if (pixel_map.source_count() != 2) throw ShapeError("addition_fuse needs a two-source map");
  Image out(first.height(), first.width(), first.channels());
  const std::size_t c = first.channels();
  auto a = first.data();
  auto b = second.data();
  auto y = out.data();
  for (std::size_t j = 0; j < y.size(); ++j) {
    const double m = pixel_map.selection()[j / c] == 0 ? 1.0 : 0.0;
    y[j] = m * a[j] + (1.0 - m) * b[j];
  }
  return out;
}

/// Same, with a patch-level map rasterized to pixels first.
inline Image addition_fuse(const Image& first, const Image& second, const FocusMap& patch_map,
                           const PatchGrid& grid) {
  return addition_fuse(first, second, rasterize_map(patch_map, grid));
}

/// K >= 3 sources: detect a joint K-way Laplacian map, then ascend.
inline FusionResult fuse_multi(std::span<const Image> sources, const FusionConfig& cfg,
                               const Image* reference = nullptr) {
  if (sources.size() < 3) throw std::invalid_argument("fuse_multi needs at least three sources");
  cfg.validate();
  const PatchGrid grid = cfg.grid_for(sources.front());
  const FocusMap map = detect_focus_map(sources, grid);
  return fuse(sources, map, cfg, std::nullopt, reference);
}

}  // namespace mffssim
