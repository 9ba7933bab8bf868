#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mffssim/png_io.hpp"
#include "temp_dir.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  Outcome run(const std::string& args) {
    const fs::path log = dir / "stdout.txt";
    const std::string cmd = std::string("\"") + MFFSSIM_CLI + "\" " + args + " > \"" + log.string() +
                            "\" 2> \"" + (dir / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(log)};
  }

  std::string p(const std::string& name) const { return "\"" + (dir / name).string() + "\""; }

  nlohmann::json json(const std::string& name) const { return nlohmann::json::parse(slurp(dir / name)); }

  // X1, X2, map_gt and reference for a 40x40 disk under synth/.
  void make_pair() { ASSERT_EQ(run("synth --scene disk --size 40 -o " + p("synth")).code, 0); }

  TempDir dir;
};

}  // namespace

TEST_F(Cli, SynthScene) {
  make_pair();
  for (const char* name : {"X1.png", "X2.png", "map_gt.png", "reference.png"}) {
    const auto png = mffssim::read_png_raw(dir / "synth" / name);
    EXPECT_EQ(png.raw.height, 40u) << name;
    EXPECT_EQ(png.raw.width, 40u) << name;
  }
  const auto map = mffssim::read_png_raw(dir / "synth" / "map_gt.png");
  bool saw_fg = false, saw_bg = false;
  for (auto v : map.raw.samples) {
    ASSERT_TRUE(v == 0 || v == 255);
    saw_fg |= v == 0;
    saw_bg |= v == 255;
  }
  EXPECT_TRUE(saw_fg && saw_bg);

  ASSERT_EQ(run("synth --scene thirds --size 30 -o " + p("thirds")).code, 0);
  EXPECT_TRUE(fs::exists(dir / "thirds" / "X3.png"));
  EXPECT_FALSE(fs::exists(dir / "thirds" / "X4.png"));
}

TEST_F(Cli, SynthFromImageAndMask) {
  make_pair();
  // The synthetic reference and map double as an input image and mask (white = background).
  ASSERT_EQ(run("synth " + p("synth/reference.png") + " " + p("synth/map_gt.png") + " --fg-sigma 1.5 -o " +
                p("custom")).code,
            0);
  const auto map = mffssim::read_png_raw(dir / "custom" / "map_gt.png");
  const auto original = mffssim::read_png_raw(dir / "synth" / "map_gt.png");
  for (std::size_t i = 0; i < map.raw.samples.size(); ++i) {
    EXPECT_EQ(map.raw.samples[i], 255 - original.raw.samples[i]);
  }
}

TEST_F(Cli, SynthErrors) {
  make_pair();
  EXPECT_EQ(run("synth -o " + p("x")).code, 2);
  EXPECT_EQ(run("synth --scene teapot -o " + p("x")).code, 2);
  EXPECT_EQ(run("synth --scene disk --sigma 0 -o " + p("x")).code, 2);
  EXPECT_EQ(run("synth --scene disk " + p("synth/X1.png") + " " + p("synth/X2.png") + " -o " + p("x")).code, 2);
  EXPECT_EQ(run("synth " + p("missing.png") + " " + p("synth/X1.png") + " -o " + p("x")).code, 3);

  ASSERT_EQ(run("synth --scene disk --size 32 -o " + p("small")).code, 0);
  EXPECT_EQ(run("synth " + p("synth/reference.png") + " " + p("small/map_gt.png") + " -o " + p("x")).code, 4);
}

TEST_F(Cli, FuseWritesArtifacts) {
  make_pair();
  const Outcome r = run("fuse " + p("synth/X1.png") + " " + p("synth/X2.png") + " --window 7 --iters 20 --reference " +
                    p("synth/reference.png") + " -o " + p("fused"));
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("Q "), std::string::npos);
  const auto fused = mffssim::read_png_raw(dir / "fused" / "fused.png");
  EXPECT_EQ(fused.raw.height, 40u);
  const auto map = mffssim::read_png_raw(dir / "fused" / "map.png");
  EXPECT_EQ(map.raw.height, 34u);
  EXPECT_EQ(map.raw.width, 34u);

  const auto report = json("fused/report.json");
  EXPECT_TRUE(report.at("iterations").is_number_integer());
  EXPECT_EQ(report.at("iterations"), 20);
  EXPECT_EQ(report.at("trace").size(), 21u);
  EXPECT_GT(report.at("Q").get<double>(), report.at("trace")[0].get<double>());
  EXPECT_TRUE(report.contains("ssim"));
  EXPECT_TRUE(report.contains("psnr_db"));
  EXPECT_EQ(report.at("config").at("resolved_window"), 7);
  EXPECT_EQ(report.at("config").at("sources").size(), 2u);

  // Without a reference there is nothing to score against.
  ASSERT_EQ(run("fuse " + p("synth/X1.png") + " " + p("synth/X2.png") + " --window 7 --iters 5 -o " + p("plain")).code,
            0);
  EXPECT_FALSE(json("plain/report.json").contains("psnr_db"));
}

TEST_F(Cli, FuseWithMapFiles) {
  make_pair();
  const std::string sources = p("synth/X1.png") + " " + p("synth/X2.png");
  // Pixel-resolution ground truth.
  ASSERT_EQ(run("fuse " + sources + " --window 5 --iters 5 --detector file --map " + p("synth/map_gt.png") +
                " -o " + p("a")).code,
            0);
  // Patch-resolution map written by detect.
  ASSERT_EQ(run("detect " + sources + " --window 5 -o " + p("det")).code, 0);
  ASSERT_EQ(run("fuse " + sources + " --window 5 --iters 5 --detector file --map " + p("det/map.png") + " -o " +
                p("b")).code,
            0);
  ASSERT_EQ(run("fuse " + sources + " --window 5 --iters 5 -o " + p("c")).code, 0);
  EXPECT_EQ(slurp(dir / "b" / "fused.png"), slurp(dir / "c" / "fused.png"));
  EXPECT_EQ(slurp(dir / "b" / "map.png"), slurp(dir / "det" / "map.png"));

  // A map matching neither the image nor the patch grid.
  EXPECT_EQ(run("fuse " + sources + " --window 7 --detector file --map " + p("det/map.png") + " -o " + p("d")).code,
            4);
}

TEST_F(Cli, FuseErrors) {
  make_pair();
  const std::string sources = p("synth/X1.png") + " " + p("synth/X2.png");
  EXPECT_EQ(run("fuse " + p("synth/X1.png") + " -o " + p("e")).code, 2);
  EXPECT_EQ(run("fuse " + sources + " --detector file -o " + p("e")).code, 2);
  EXPECT_EQ(run("fuse " + sources + " --detector sobel -o " + p("e")).code, 2);
  EXPECT_EQ(run("fuse " + sources + " --lr -1 -o " + p("e")).code, 2);
  EXPECT_EQ(run("fuse " + sources + " --bogus -o " + p("e")).code, 2);
  EXPECT_EQ(run("fuse " + sources + " " + p("nope.png") + " -o " + p("e")).code, 3);
  EXPECT_EQ(run("fuse " + sources + " --window 41 -o " + p("e")).code, 4);

  ASSERT_EQ(run("synth --scene disk --size 32 -o " + p("small")).code, 0);
  EXPECT_EQ(run("fuse " + p("synth/X1.png") + " " + p("small/X2.png") + " -o " + p("e")).code, 4);
  EXPECT_EQ(run("fuse " + sources + " --iters 2 --reference " + p("small/reference.png") + " -o " + p("e")).code, 4);
}

TEST_F(Cli, Detect) {
  make_pair();
  ASSERT_EQ(run("detect " + p("synth/X1.png") + " " + p("synth/X2.png") + " --window 9 -o " + p("det")).code, 0);
  const auto report = json("det/report.json");
  EXPECT_EQ(report.at("window"), 9);
  EXPECT_EQ(report.at("patch_rows"), 32);
  EXPECT_EQ(report.at("sources"), 2);
  const auto counts = report.at("selected_counts");
  EXPECT_EQ(counts[0].get<int>() + counts[1].get<int>(), 32 * 32);
  const auto map = mffssim::read_png_raw(dir / "det" / "map.png");
  EXPECT_EQ(map.raw.width, 32u);
  EXPECT_EQ(run("detect " + p("synth/X1.png") + " -o " + p("det2")).code, 2);
}

TEST_F(Cli, Evaluate) {
  make_pair();
  const Outcome same = run("evaluate " + p("synth/reference.png") + " " + p("synth/reference.png"));
  ASSERT_EQ(same.code, 0);
  const auto j = nlohmann::json::parse(same.out);
  EXPECT_EQ(j.size(), 2u);
  EXPECT_EQ(j.at("psnr_db"), 100.0);
  EXPECT_EQ(j.at("ssim"), 1.0);

  const Outcome other = run("evaluate " + p("synth/X1.png") + " " + p("synth/reference.png") + " -o " + p("ev"));
  ASSERT_EQ(other.code, 0);
  EXPECT_LT(nlohmann::json::parse(other.out).at("psnr_db").get<double>(), 100.0);
  EXPECT_EQ(json("ev/report.json"), nlohmann::json::parse(other.out));

  // One of four pixels off by 51/255 = 0.2: MSE 0.01, 20 dB.
  mffssim::write_png_raw(dir / "a.png", mffssim::RawImage{2, 2, 1, {100, 100, 100, 100}});
  mffssim::write_png_raw(dir / "b.png", mffssim::RawImage{2, 2, 1, {100, 151, 100, 100}});
  const Outcome twenty = run("evaluate " + p("a.png") + " " + p("b.png"));
  ASSERT_EQ(twenty.code, 0);
  EXPECT_NEAR(nlohmann::json::parse(twenty.out).at("psnr_db").get<double>(), 20.0, 1e-9);
  EXPECT_EQ(run("evaluate " + p("a.png") + " " + p("synth/X1.png")).code, 4);

  EXPECT_EQ(run("evaluate " + p("synth/X1.png")).code, 2);
  EXPECT_EQ(run("evaluate " + p("synth/X1.png") + " " + p("nope.png")).code, 3);
}

TEST_F(Cli, RobustnessAndSweep) {
  const std::string common = " --size 32 --window 5 --iters 10 --seed 3";
  ASSERT_EQ(run("robustness" + common + " --trials 2 --p 0,0.5 -o " + p("rob")).code, 0);
  for (const char* name : {"record.json", "record.csv", "summary.csv", "timing.csv"}) {
    EXPECT_TRUE(fs::exists(dir / "rob" / name)) << name;
  }
  const auto rec = json("rob/record.json");
  EXPECT_EQ(rec.at("rows").size(), 4u);
  EXPECT_EQ(rec.at("summary").size(), 2u);
  EXPECT_EQ(rec.at("config").at("seed"), 3);

  ASSERT_EQ(run("sweep --size 48 --iters 5 --alphas 1.5e-3,3e-3 -o " + p("sw")).code, 0);
  const auto sw = json("sw/record.json");
  ASSERT_EQ(sw.at("rows").size(), 2u);
  EXPECT_EQ(sw.at("rows")[1].at("window"), 7);

  EXPECT_EQ(run("robustness" + common + " --p 0,2 -o " + p("bad")).code, 2);
  EXPECT_EQ(run("robustness" + common + " --trials 0 -o " + p("bad")).code, 2);
  EXPECT_EQ(run("robustness" + common + " --scene thirds -o " + p("bad")).code, 2);
  EXPECT_EQ(run("sweep --size 32 --alphas -1 -o " + p("bad")).code, 2);
}

TEST_F(Cli, RerunsAreByteIdentical) {
  make_pair();
  const std::string fuse = "fuse " + p("synth/X1.png") + " " + p("synth/X2.png") + " --window 5 --iters 15 ";
  ASSERT_EQ(run(fuse + "-o " + p("r1")).code, 0);
  ASSERT_EQ(run(fuse + "-o " + p("r2")).code, 0);
  for (const char* name : {"fused.png", "map.png", "report.json"}) {
    EXPECT_EQ(slurp(dir / "r1" / name), slurp(dir / "r2" / name)) << name;
  }
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("transmogrify").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}
