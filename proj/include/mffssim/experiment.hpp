#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mffssim/focus.hpp"
#include "mffssim/fusion.hpp"
#include "mffssim/image.hpp"
#include "mffssim/report.hpp"
#include "mffssim/ssim.hpp"
#include "mffssim/synth.hpp"

namespace mffssim {

enum class Detector { laplacian, file };

inline std::string to_string(Detector d) { return d == Detector::laplacian ? "laplacian" : "file"; }

/// Everything a CLI run resolves to, logged verbatim into its reports.
struct RunConfig {
  FusionConfig fusion;
  Detector detector = Detector::laplacian;
  std::optional<std::filesystem::path> map_path;
  std::filesystem::path out_dir = ".";
  std::optional<std::filesystem::path> reference_path;
  std::uint64_t seed = 0;
  std::string scene = "disk";
  std::size_t scene_size = 64;
  double blur_sigma = 2.0;
  std::size_t trials = 20;
  std::vector<double> corruption_levels = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> window_ratios;

  void validate() const {
    fusion.validate();
    if ((detector == Detector::file) != map_path.has_value()) {
      throw std::invalid_argument("a map path is required exactly when the detector is 'file'");
    }
    if (!(blur_sigma > 0.0)) throw std::invalid_argument("blur sigma must be positive");
    for (double p : corruption_levels) {
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("corruption levels must lie in [0, 1]");
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json j = fusion.to_json();
    j["detector"] = to_string(detector);
    j["map"] = map_path ? nlohmann::json(map_path->string()) : nlohmann::json(nullptr);
    j["reference"] = reference_path ? nlohmann::json(reference_path->string()) : nlohmann::json(nullptr);
    j["seed"] = seed;
    j["scene"] = scene;
    j["scene_size"] = scene_size;
    j["blur_sigma"] = blur_sigma;
    j["trials"] = trials;
    j["corruption_levels"] = corruption_levels;
    j["window_ratios"] = window_ratios;
    return j;
  }
};

struct TrialRow {
  double parameter = 0;
  std::size_t trial = 0;
  std::size_t window = 0;
  double q = 0;
  double psnr_db = 0;
  double ssim = 0;
  std::size_t iterations = 0;
  double wall_seconds = 0;
  double seconds_per_iteration = 0;
};

/// Rows ordered by (parameter position, trial).
struct ExperimentRecord {
  std::string kind;
  std::string parameter_name;
  std::vector<TrialRow> rows;
  nlohmann::json config;

  struct Summary {
    double parameter;
    double mean_q, mean_psnr_db, mean_ssim;
    std::size_t trials;
  };

  /// Per-parameter means, in first-appearance order.
  std::vector<Summary> summary() const {
    std::vector<Summary> out;
    for (const auto& row : rows) {
      if (out.empty() || out.back().parameter != row.parameter || row.trial == 0) {
        out.push_back({row.parameter, 0, 0, 0, 0});
      }
      auto& s = out.back();
      s.mean_q += row.q;
      s.mean_psnr_db += row.psnr_db;
      s.mean_ssim += row.ssim;
      ++s.trials;
    }
    for (auto& s : out) {
      s.mean_q /= static_cast<double>(s.trials);
      s.mean_psnr_db /= static_cast<double>(s.trials);
      s.mean_ssim /= static_cast<double>(s.trials);
    }
    return out;
  }

  /// Timing-free view of the record; reproducible byte for byte.
  nlohmann::json to_json() const {
    nlohmann::json j;
    j["kind"] = kind;
    j["parameter"] = parameter_name;
    j["config"] = config;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) {
      j["rows"].push_back({{parameter_name, r.parameter}, {"trial", r.trial}, {"window", r.window},
                           {"Q", r.q}, {"psnr_db", r.psnr_db}, {"ssim", r.ssim},
                           {"iterations", r.iterations}});
    }
    j["summary"] = nlohmann::json::array();
    for (const auto& s : summary()) {
      j["summary"].push_back({{parameter_name, s.parameter}, {"trials", s.trials}, {"Q", s.mean_q},
                              {"psnr_db", s.mean_psnr_db}, {"ssim", s.mean_ssim}});
    }
    return j;
  }

  std::string to_csv() const {
    std::ostringstream out;
    out << std::setprecision(17);
    out << parameter_name << ",trial,window,Q,psnr_db,ssim,iterations\n";
    for (const auto& r : rows) {
      out << r.parameter << ',' << r.trial << ',' << r.window << ',' << r.q << ',' << r.psnr_db
          << ',' << r.ssim << ',' << r.iterations << '\n';
    }
    return out.str();
  }

  std::string summary_csv() const {
    std::ostringstream out;
    out << std::setprecision(17);
    out << parameter_name << ",trials,Q,psnr_db,ssim\n";
    for (const auto& s : summary()) {
      out << s.parameter << ',' << s.trials << ',' << s.mean_q << ',' << s.mean_psnr_db << ','
          << s.mean_ssim << '\n';
    }
    return out.str();
  }

  /// Wall-clock measurements; varies between runs.
  std::string timing_csv() const {
    std::ostringstream out;
    out << std::setprecision(9);
    out << parameter_name << ",trial,window,wall_seconds,seconds_per_iteration\n";
    for (const auto& r : rows) {
      out << r.parameter << ',' << r.trial << ',' << r.window << ',' << r.wall_seconds << ','
          << r.seconds_per_iteration << '\n';
    }
    return out.str();
  }
};

namespace detail {

inline TrialRow run_trial(std::span<const Image> sources, const FocusMap& map,
                          const FusionConfig& cfg, const Image& reference, double parameter,
                          std::size_t trial, std::size_t window) {
  const auto start = std::chrono::steady_clock::now();
  const FusionResult fused = fuse(sources, map, cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const MetricReport scores = evaluate(reference, fused.fused);
  TrialRow row;
  row.parameter = parameter;
  row.trial = trial;
  row.window = window;
  row.q = fused.report.at("Q");
  row.psnr_db = scores.at("psnr_db");
  row.ssim = scores.at("ssim");
  row.iterations = static_cast<std::size_t>(fused.report.at("iterations"));
  row.wall_seconds = wall;
  // One objective evaluation per update plus the initial one.
  row.seconds_per_iteration = wall / static_cast<double>(row.iterations + 1);
  return row;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace detail

/// Synthetic defocus pair for a named procedural scene.
inline SynthPair scene_pair(const RunConfig& cfg) {
  const Scene scene = make_scene(cfg.scene, cfg.scene_size);
  if (scene.masks.size() != 2) throw std::invalid_argument("scene '" + cfg.scene + "' is not a two-region scene");
  const BlurSpec blur{cfg.blur_sigma};
  return synthesize_pair(scene.image, scene.masks.front(), blur, blur);
}

/// Focus-map corruption study: for every level p and trial, corrupt the
/// ground-truth patch map, fuse, and score against the all-in-focus image.
/// Trial t uses the same corruption stream at every p, so the flipped
/// sets are nested as p grows.
inline ExperimentRecord run_robustness(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.trials == 0) throw std::invalid_argument("robustness needs at least one trial");
  if (cfg.corruption_levels.empty()) throw std::invalid_argument("no corruption levels given");
  const SynthPair pair = scene_pair(cfg);
  const std::vector<Image> sources{pair.first, pair.second};
  const PatchGrid grid = cfg.fusion.grid_for(pair.reference);
  const FocusMap truth = patch_map_from_pixels(pair.pixel_map, grid);

  ExperimentRecord record{"robustness", "p", {}, cfg.to_json()};
  record.config["resolved_window"] = grid.window();
  for (double p : cfg.corruption_levels) {
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      const FocusMap map = corrupt_map(truth, p, detail::splitmix64(cfg.seed) ^ t);
      record.rows.push_back(detail::run_trial(sources, map, cfg.fusion, pair.reference, p, t, grid.window()));
    }
  }
  return record;
}

/// Window-size study: one fusion per window ratio, W = round(ratio M N),
/// each with its own Laplacian focus map.
inline ExperimentRecord run_sweep(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.window_ratios.empty()) throw std::invalid_argument("no window ratios given");
  const SynthPair pair = scene_pair(cfg);
  const std::vector<Image> sources{pair.first, pair.second};

  ExperimentRecord record{"sweep", "alpha", {}, cfg.to_json()};
  for (double alpha : cfg.window_ratios) {
    if (!(alpha > 0.0)) throw std::invalid_argument("window ratios must be positive");
    FusionConfig fc = cfg.fusion;
    fc.window.reset();
    fc.window_ratio = alpha;
    const PatchGrid grid = fc.grid_for(pair.reference);
    const FocusMap map = detect_focus_map(sources, grid);
    record.rows.push_back(detail::run_trial(sources, map, fc, pair.reference, alpha, 0, grid.window()));
  }
  return record;
}

/// Writes record.json, record.csv and summary.csv (reproducible) plus
/// timing.csv (wall clock) into `dir`.
inline void write_record(const std::filesystem::path& dir, const ExperimentRecord& record) {
  std::filesystem::create_directories(dir);
  write_json(dir / "record.json", record.to_json());
  detail::write_text(dir / "record.csv", record.to_csv());
  detail::write_text(dir / "summary.csv", record.summary_csv());
  detail::write_text(dir / "timing.csv", record.timing_csv());
}

}  // namespace mffssim
