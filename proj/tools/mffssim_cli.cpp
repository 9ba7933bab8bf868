// mffssim: multi-focus fusion by MFF-SSIM gradient ascent.
//
//   mffssim fuse a.png b.png -o out/           fused.png, map.png, report.json
//   mffssim detect a.png b.png -o out/         map.png, report.json
//   mffssim synth --scene disk --size 64 -o d/ X1.png, X2.png, map_gt.png, reference.png
//   mffssim evaluate fused.png reference.png   {"psnr_db": ..., "ssim": ...}
//   mffssim robustness -o r/                   record.json/csv, summary.csv, timing.csv
//   mffssim sweep --alphas 1.5e-5,9.5e-5 -o s/ same
//
// Exit codes: 0 success, 2 usage, 3 I/O, 4 shape/consistency.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mffssim/experiment.hpp"
#include "mffssim/focus.hpp"
#include "mffssim/fusion.hpp"
#include "mffssim/png_io.hpp"
#include "mffssim/synth.hpp"

namespace fs = std::filesystem;
using namespace mffssim;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitShape = 4;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct SharedFlags {
  double window_ratio = 5e-5;
  std::optional<std::size_t> window;
  double lr = 1e-3;
  std::size_t iters = 1000;
  double stop_tol = 1e-8;
  std::size_t stride = 1;
  double c1 = 1e-4;
  double c2 = 9e-4;
  bool overlap_normalize = false;
  std::string detector = "laplacian";
  std::optional<std::string> map;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::optional<std::string> reference;

  void attach(CLI::App* cmd) {
    cmd->add_option("--window-ratio", window_ratio, "W = round(ratio * M * N)")->capture_default_str();
    cmd->add_option("--window", window, "window side length, overrides --window-ratio");
    cmd->add_option("--lr", lr, "gradient ascent step")->capture_default_str();
    cmd->add_option("--iters", iters, "maximum number of updates")->capture_default_str();
    cmd->add_option("--stop-tol", stop_tol, "stop once |dQ| falls below this")->capture_default_str();
    cmd->add_option("--stride", stride, "patch stride")->capture_default_str();
    cmd->add_option("--c1", c1, "SSIM luminance constant")->capture_default_str();
    cmd->add_option("--c2", c2, "SSIM contrast constant")->capture_default_str();
    cmd->add_flag("--overlap-normalize", overlap_normalize,
                  "divide the gradient by each pixel's patch-overlap count");
    cmd->add_option("--detector", detector, "focus map source")
        ->check(CLI::IsMember({"laplacian", "file"}))
        ->capture_default_str();
    cmd->add_option("--map", map, "focus map PNG (with --detector file)");
    cmd->add_option("--seed", seed, "random seed")->capture_default_str();
    cmd->add_option("-o,--out", out, "output directory")->capture_default_str();
    cmd->add_option("--reference", reference, "all-in-focus reference image");
  }

  RunConfig resolve() const {
    RunConfig cfg;
    cfg.fusion.window_ratio = window_ratio;
    cfg.fusion.window = window;
    cfg.fusion.learning_rate = lr;
    cfg.fusion.max_iters = iters;
    cfg.fusion.stop_tol = stop_tol;
    cfg.fusion.stride = stride;
    cfg.fusion.constants = {c1, c2};
    cfg.fusion.overlap_normalize = overlap_normalize;
    cfg.detector = detector == "file" ? Detector::file : Detector::laplacian;
    if (map) cfg.map_path = fs::path(*map);
    cfg.seed = seed;
    cfg.out_dir = out;
    if (reference) cfg.reference_path = fs::path(*reference);
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return cfg;
  }
};

std::vector<Image> read_sources(const std::vector<std::string>& paths) {
  std::vector<Image> images;
  for (const auto& p : paths) images.push_back(read_png(p));
  for (std::size_t k = 1; k < images.size(); ++k) {
    if (!images[k].same_shape(images.front())) {
      throw ShapeError("source " + paths[k] + " is " + images[k].shape_string() + " but " +
                       paths.front() + " is " + images.front().shape_string());
    }
  }
  return images;
}

FocusMap resolve_map(const RunConfig& cfg, std::span<const Image> sources, const PatchGrid& grid) {
  if (cfg.detector == Detector::laplacian) return detect_focus_map(sources, grid);
  FocusMap map = load_map(*cfg.map_path, sources.size());
  // A pixel-resolution map is sampled at patch centres.
  if (map.rows() == grid.image_height() && map.cols() == grid.image_width() &&
      (map.rows() != grid.rows() || map.cols() != grid.cols())) {
    return patch_map_from_pixels(map, grid);
  }
  map.require_matches(grid);
  return map;
}

int cmd_fuse(const SharedFlags& flags, const std::vector<std::string>& inputs) {
  if (inputs.size() < 2) throw UsageError("need at least two sources");
  const RunConfig cfg = flags.resolve();
  const std::vector<Image> sources = read_sources(inputs);
  const PatchGrid grid = cfg.fusion.grid_for(sources.front());
  const FocusMap map = resolve_map(cfg, sources, grid);
  std::optional<Image> reference;
  if (cfg.reference_path) reference = read_png(*cfg.reference_path);

  FusionResult result = fuse(sources, map, cfg.fusion, std::nullopt, reference ? &*reference : nullptr);
  nlohmann::json config = cfg.to_json();
  config["resolved_window"] = grid.window();
  config["sources"] = inputs;
  result.report.config = config;

  fs::create_directories(cfg.out_dir);
  write_png(cfg.out_dir / "fused.png", result.fused);
  save_map(cfg.out_dir / "map.png", map);
  write_json(cfg.out_dir / "report.json", result.report.to_json());
  std::cout << "Q " << result.report.at("Q") << " after "
            << static_cast<long long>(result.report.at("iterations")) << " iterations\n";
  return 0;
}

int cmd_detect(const SharedFlags& flags, const std::vector<std::string>& inputs) {
  if (inputs.size() < 2) throw UsageError("need at least two sources");
  const RunConfig cfg = flags.resolve();
  const std::vector<Image> sources = read_sources(inputs);
  const PatchGrid grid = cfg.fusion.grid_for(sources.front());
  const FocusMap map = detect_focus_map(sources, grid);

  nlohmann::json report;
  report["window"] = grid.window();
  report["patch_rows"] = grid.rows();
  report["patch_cols"] = grid.cols();
  report["sources"] = sources.size();
  std::vector<std::size_t> counts(sources.size(), 0);
  for (auto k : map.selection()) ++counts[k];
  report["selected_counts"] = counts;
  report["config"] = cfg.to_json();

  fs::create_directories(cfg.out_dir);
  save_map(cfg.out_dir / "map.png", map);
  write_json(cfg.out_dir / "report.json", report);
  return 0;
}

struct SynthFlags {
  std::string scene;
  std::size_t size = 64;
  double sigma = 2.0;
  std::optional<double> fg_sigma;
  std::optional<double> bg_sigma;
  std::string out = ".";
};

int cmd_synth(const SynthFlags& flags, const std::vector<std::string>& inputs) {
  if (!flags.scene.empty() == (inputs.size() == 2)) {
    throw UsageError("give either IMAGE MASK or --scene NAME");
  }
  if (!inputs.empty() && inputs.size() != 2) throw UsageError("synth takes exactly IMAGE and MASK");
  if (!(flags.sigma > 0.0)) throw UsageError("--sigma must be positive");
  const BlurSpec fg{flags.fg_sigma.value_or(flags.sigma)};
  const BlurSpec bg{flags.bg_sigma.value_or(flags.sigma)};
  if (!(fg.sigma > 0.0) || !(bg.sigma > 0.0)) throw UsageError("blur sigmas must be positive");

  Image image;
  std::vector<Image> masks;
  if (!flags.scene.empty()) {
    Scene scene;
    try {
      scene = make_scene(flags.scene, flags.size);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    image = std::move(scene.image);
    masks = std::move(scene.masks);
  } else {
    image = read_png(inputs[0]);
    Image mask = to_grayscale(read_png(inputs[1]));
    if (mask.height() != image.height() || mask.width() != image.width()) {
      throw ShapeError("mask " + mask.shape_string() + " does not match image " + image.shape_string());
    }
    masks.push_back(std::move(mask));
  }

  const fs::path out = flags.out;
  fs::create_directories(out);
  write_png(out / "reference.png", image);
  if (masks.size() <= 2) {
    const SynthPair pair = synthesize_pair(image, masks.front(), fg, bg);
    write_png(out / "X1.png", pair.first);
    write_png(out / "X2.png", pair.second);
    save_map(out / "map_gt.png", pair.pixel_map);
  } else {
    const SynthStack stack = synthesize_stack(image, masks, {fg});
    for (std::size_t k = 0; k < stack.sources.size(); ++k) {
      write_png(out / ("X" + std::to_string(k + 1) + ".png"), stack.sources[k]);
    }
    save_map(out / "map_gt.png", stack.pixel_map);
  }
  return 0;
}

int cmd_evaluate(const std::vector<std::string>& inputs, const std::optional<std::string>& out) {
  if (inputs.size() != 2) throw UsageError("evaluate takes FUSED and REFERENCE");
  const Image fused = read_png(inputs[0]);
  const Image reference = read_png(inputs[1]);
  const nlohmann::json report = evaluate(reference, fused).to_json();
  if (out) {
    fs::create_directories(*out);
    write_json(fs::path(*out) / "report.json", report);
  }
  std::cout << report.dump(2) << '\n';
  return 0;
}

struct ExperimentFlags {
  std::string scene = "disk";
  std::size_t size = 64;
  double sigma = 2.0;
  std::size_t trials = 20;
  std::vector<double> levels = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> alphas = {1.5e-5, 2.5e-5, 3.5e-5, 4.5e-5, 5.5e-5, 6.5e-5, 7.5e-5, 8.5e-5, 9.5e-5};

  void attach(CLI::App* cmd) {
    cmd->add_option("--scene", scene, "procedural scene (disk, stripes, text)")->capture_default_str();
    cmd->add_option("--size", size, "scene side length")->capture_default_str();
    cmd->add_option("--sigma", sigma, "defocus blur sigma")->capture_default_str();
  }

  RunConfig apply(RunConfig cfg) const {
    cfg.scene = scene;
    cfg.scene_size = size;
    cfg.blur_sigma = sigma;
    cfg.trials = trials;
    cfg.corruption_levels = levels;
    cfg.window_ratios = alphas;
    try {
      cfg.validate();
      if (trials == 0) throw std::invalid_argument("--trials must be positive");
      (void)make_scene(scene, size);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return cfg;
  }
};

int cmd_robustness(const SharedFlags& flags, const ExperimentFlags& exp) {
  const RunConfig cfg = exp.apply(flags.resolve());
  const ExperimentRecord record = run_robustness(cfg);
  write_record(cfg.out_dir, record);
  for (const auto& s : record.summary()) {
    std::cout << "p " << s.parameter << "  psnr " << s.mean_psnr_db << " dB  ssim " << s.mean_ssim << '\n';
  }
  return 0;
}

int cmd_sweep(const SharedFlags& flags, const ExperimentFlags& exp) {
  const RunConfig cfg = exp.apply(flags.resolve());
  const ExperimentRecord record = run_sweep(cfg);
  write_record(cfg.out_dir, record);
  for (const auto& r : record.rows) {
    std::cout << "alpha " << r.parameter << "  W " << r.window << "  psnr " << r.psnr_db
              << " dB  ssim " << r.ssim << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-focus image fusion by MFF-SSIM gradient ascent"};
  app.require_subcommand(1);

  SharedFlags shared;
  std::vector<std::string> inputs;

  auto* fuse_cmd = app.add_subcommand("fuse", "fuse two or more source images");
  fuse_cmd->add_option("sources", inputs, "source PNGs");
  shared.attach(fuse_cmd);

  auto* detect_cmd = app.add_subcommand("detect", "write the Laplacian focus map");
  detect_cmd->add_option("sources", inputs, "source PNGs");
  shared.attach(detect_cmd);

  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic multi-focus set");
  synth_cmd->add_option("inputs", inputs, "IMAGE MASK");
  synth_cmd->add_option("--scene", synth.scene, "procedural scene (disk, stripes, text, thirds)");
  synth_cmd->add_option("--size", synth.size, "scene side length")->capture_default_str();
  synth_cmd->add_option("--sigma", synth.sigma, "blur sigma for both layers")->capture_default_str();
  synth_cmd->add_option("--fg-sigma", synth.fg_sigma, "foreground blur sigma");
  synth_cmd->add_option("--bg-sigma", synth.bg_sigma, "background blur sigma");
  synth_cmd->add_option("-o,--out", synth.out, "output directory")->capture_default_str();

  std::optional<std::string> eval_out;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a fused image against a reference");
  eval_cmd->add_option("images", inputs, "FUSED REFERENCE");
  eval_cmd->add_option("-o,--out", eval_out, "directory for report.json");

  ExperimentFlags robust;
  auto* robust_cmd = app.add_subcommand("robustness", "focus-map corruption study");
  shared.attach(robust_cmd);
  robust.attach(robust_cmd);
  robust_cmd->add_option("--p", robust.levels, "corruption probabilities")->delimiter(',');
  robust_cmd->add_option("--trials", robust.trials, "trials per probability")->capture_default_str();

  ExperimentFlags sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "window-size ratio study");
  shared.attach(sweep_cmd);
  sweep.attach(sweep_cmd);
  sweep_cmd->add_option("--alphas", sweep.alphas, "window size ratios")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (fuse_cmd->parsed()) return cmd_fuse(shared, inputs);
    if (detect_cmd->parsed()) return cmd_detect(shared, inputs);
    if (synth_cmd->parsed()) return cmd_synth(synth, inputs);
    if (eval_cmd->parsed()) return cmd_evaluate(inputs, eval_out);
    if (robust_cmd->parsed()) return cmd_robustness(shared, robust);
    if (sweep_cmd->parsed()) return cmd_sweep(shared, sweep);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitShape;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitUsage;
}
