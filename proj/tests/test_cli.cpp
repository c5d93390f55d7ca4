#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include "rigrecon/core/json_io.hpp"
#include "rigrecon/pipeline/config.hpp"
#include "rigrecon/pipeline/stages.hpp"

namespace rigrecon::pipeline {
namespace {

namespace fs = std::filesystem;

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RIGRECON_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = read_bytes(e.path());
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rigrecon_cli_" + name);
  fs::remove_all(p);
  return p;
}

TEST(Config, DefaultsRoundTrip) {
  const Json j = config_to_json(RunConfig{});
  EXPECT_EQ(config_to_json(config_from_json(j)), j);
  EXPECT_EQ(j["k"], 250);
  EXPECT_EQ(j["matching"]["window"], 5);
  EXPECT_EQ(j["sync"]["fps"], 120.0);
}

TEST(Config, RejectsInvalidValuesAndUnknownKeys) {
  for (const Json& bad : {Json{{"k", 1}}, Json{{"matching", {{"window", -1}}}}, Json{{"colour", 3}},
                          Json{{"splat", {{"iterations", "many"}}}}}) {
    try {
      config_from_json(bad);
      FAIL() << bad.dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ConfigInvalid) << bad.dump();
    }
  }
}

TEST(Config, OverridesParseJsonValues) {
  Json doc = Json::object();
  apply_override(doc, "splat.lr_mu=2e-5");
  apply_override(doc, "paths.output=somewhere");
  apply_override(doc, "ablation.disable_sync=true");
  const auto c = config_from_json(doc);
  EXPECT_EQ(c.splat.lr.mu, 2e-5);
  EXPECT_EQ(c.paths.output, "somewhere");
  EXPECT_TRUE(c.ablation.disable_sync);
  EXPECT_THROW(apply_override(doc, "no_equals_sign"), Error);
}

TEST(Cli, InvalidConfigExitsWithConfigInvalid) {
  const auto out = scratch("invalid");
  EXPECT_EQ(run_cli("run-all --k 1 --output " + out.string()), static_cast<int>(ErrorCode::ConfigInvalid));
  EXPECT_EQ(run_cli("sfm --set select.k=4 --output " + out.string()), static_cast<int>(ErrorCode::ConfigInvalid));
  EXPECT_EQ(run_cli("sfm --no-such-flag"), static_cast<int>(ErrorCode::ConfigInvalid));
  EXPECT_EQ(run_cli("sfm --config /nonexistent/config.json"), static_cast<int>(ErrorCode::MissingInput));
  EXPECT_EQ(run_cli("sfm --output " + out.string()), static_cast<int>(ErrorCode::MissingInput));
  // The failure is recorded in the run report.
  const Json report = read_json_file(out / "report.json");
  EXPECT_EQ(report["failure"]["stage"], "sfm");
  EXPECT_EQ(report["failure"]["code"], static_cast<int>(ErrorCode::MissingInput));
  fs::remove_all(out);
}

class RunAll : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    out_ = scratch("run_all");
    status_ = run_cli("run-all --k 6 --splat-iters 10 --threads 1 --serve --output " + out_.string());
  }
  static void TearDownTestSuite() { fs::remove_all(out_); }
  static fs::path out_;
  static int status_;
};
fs::path RunAll::out_;
int RunAll::status_ = -1;

TEST_F(RunAll, ReportHoldsSfmStatsAndSplatMetrics) {
  ASSERT_EQ(status_, 0);
  const Json r = read_json_file(out_ / "report.json");
  for (const char* key : {"registered_images", "num_points", "mean_track_length", "mean_reprojection_error_px"})
    EXPECT_TRUE(r["stages"]["sfm"]["stats"].contains(key)) << key;
  EXPECT_TRUE(r["stages"]["sfm"]["stats_consistent"].get<bool>());
  EXPECT_EQ(r["stages"]["sfm"]["stats"]["registered_images"], 18);
  const Json& held = r["stages"]["metrics"]["heldout"];
  EXPECT_FALSE(held["views"].empty());
  EXPECT_TRUE(held["mean_psnr"].is_number());
  EXPECT_TRUE(held["mean_ssim"].is_number());
  EXPECT_FALSE(r.contains("failure"));
  for (const auto& stage : stage_names()) EXPECT_TRUE(r["timings_s"].contains(stage)) << stage;
  EXPECT_EQ(r["config"]["k"], 6);
  EXPECT_TRUE(fs::exists(out_ / "report.txt"));
  EXPECT_EQ(read_bytes(out_ / "serve/cloud.ply"), read_bytes(out_ / "splat/cloud.ply"));
}

TEST_F(RunAll, StageReportsMatchPersistedArtifacts) {
  ASSERT_EQ(status_, 0);
  const Json r = read_json_file(out_ / "report.json");
  EXPECT_EQ(r["stages"]["sfm"]["stats"], read_json_file(out_ / "sfm/stats.json"));
  EXPECT_EQ(r["stages"]["sync"], read_json_file(out_ / "reports/sync.json"));
  const Json tracks = read_json_file(out_ / "matches/tracks.json");
  EXPECT_EQ(r["stages"]["match-verify"]["tracks"], tracks["tracks"].size());
}

TEST_F(RunAll, RerunningAStageIsIdempotent) {
  ASSERT_EQ(status_, 0);
  const auto before = tree(out_);
  for (const auto& stage : stage_names())
    ASSERT_EQ(run_cli(stage + " --k 6 --splat-iters 10 --threads 1 --output " + out_.string()), 0) << stage;
  const auto after = tree(out_);
  for (const auto& [name, bytes] : before) {
    if (name == "report.json" || name == "report.txt") continue;
    ASSERT_TRUE(after.count(name)) << name;
    EXPECT_EQ(after.at(name), bytes) << name;
  }
}

TEST_F(RunAll, AblationFlagsChangeTheSchedule) {
  ASSERT_EQ(status_, 0);
  const auto out = scratch("ablation");
  fs::create_directories(out);
  fs::copy(out_ / "synth", out / "synth", fs::copy_options::recursive);
  fs::copy(out_ / "calibration", out / "calibration", fs::copy_options::recursive);
  ASSERT_EQ(run_cli("sync --disable-sync --k 6 --output " + out.string()), 0);
  EXPECT_EQ(read_json_file(out / "reports/sync.json")["offset_left"], 0);
  ASSERT_EQ(run_cli("select --k 6 --output " + out.string()), 0);
  ASSERT_EQ(run_cli("match-verify --disable-custom-matching --k 6 --output " + out.string()), 0);
  const Json m = read_json_file(out / "reports/match-verify.json");
  EXPECT_EQ(m["schedule"], "all_pairs");
  EXPECT_GT(m["pairs_per_class"]["cross_LR"].get<int>(), 0);
  fs::remove_all(out);
}

}  // namespace
}  // namespace rigrecon::pipeline
