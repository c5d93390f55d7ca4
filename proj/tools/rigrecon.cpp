// rigrecon: stage-by-stage driver for the undercarriage reconstruction pipeline.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rigrecon/core/parallel.hpp"
#include "rigrecon/pipeline/config.hpp"
#include "rigrecon/pipeline/report.hpp"
#include "rigrecon/pipeline/stages.hpp"

namespace fs = std::filesystem;
using namespace rigrecon;

namespace {

struct Flags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::string> output;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads, k, window, sync_bound, splat_iters;
  bool disable_calibration = false, disable_sync = false, disable_custom_matching = false, disable_pose_priors = false;
  bool serve = false;
};

pipeline::RunConfig load_config(const Flags& f) {
  Json doc = Json::object();
  if (!f.config.empty()) doc = pipeline::read_config_file(f.config);
  for (const auto& s : f.sets) pipeline::apply_override(doc, s);
  auto set = [&](const char* section, const char* key, const Json& v) {
    if (section)
      doc[section][key] = v;
    else
      doc[key] = v;
  };
  if (f.output) set("paths", "output", *f.output);
  if (f.seed) set(nullptr, "seed", *f.seed);
  if (f.threads) set(nullptr, "threads", *f.threads);
  if (f.k) set(nullptr, "k", *f.k);
  if (f.window) set("matching", "window", *f.window);
  if (f.sync_bound) set("sync", "bound", *f.sync_bound);
  if (f.splat_iters) set("splat", "iterations", *f.splat_iters);
  if (f.disable_calibration) set("ablation", "disable_calibration", true);
  if (f.disable_sync) set("ablation", "disable_sync", true);
  if (f.disable_custom_matching) set("ablation", "disable_custom_matching", true);
  if (f.disable_pose_priors) set("ablation", "disable_pose_priors", true);
  return pipeline::config_from_json(doc);
}

// Copies the PLY export and, when configured, the viewer bundle into
// <output>/serve for static hosting.
void serve(const pipeline::RunConfig& c) {
  const fs::path dir = c.out() / "serve", ply = c.out() / "splat/cloud.ply";
  require(fs::exists(ply), ErrorCode::MissingInput, "nothing to serve, " + ply.string() + " not found");
  fs::create_directories(dir);
  fs::copy_file(ply, dir / "cloud.ply", fs::copy_options::overwrite_existing);
  if (!c.paths.viewer.empty()) {
    require(fs::is_directory(c.paths.viewer), ErrorCode::MissingInput, "viewer bundle not found: " + c.paths.viewer);
    fs::copy(c.paths.viewer, dir, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
  }
  std::cout << "serve directory: " << dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rig-aware undercarriage reconstruction"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "config file (JSON, comments allowed)");
  app.add_option("--set", f.sets, "override a config value, e.g. --set splat.lr_mu=2e-5");
  app.add_option("--output", f.output, "output directory");
  app.add_option("--seed", f.seed, "master seed");
  app.add_option("--threads", f.threads, "worker threads (0: all cores; 1: bitwise reproducible)");
  app.add_option("--k", f.k, "number of frame triplets to select");
  app.add_option("--window", f.window, "pair window");
  app.add_option("--sync-bound", f.sync_bound, "largest offset searched by the sync stage");
  app.add_option("--splat-iters", f.splat_iters, "splat optimization iterations");
  app.add_flag("--disable-calibration", f.disable_calibration, "use the FOV pinhole guess instead of calibration");
  app.add_flag("--disable-sync", f.disable_sync, "pair streams by frame number");
  app.add_flag("--disable-custom-matching", f.disable_custom_matching, "match all pairs, L-R included");
  app.add_flag("--disable-pose-priors", f.disable_pose_priors, "bundle adjustment without rig priors");
  app.add_flag("--serve", f.serve, "copy the PLY export and viewer bundle into <output>/serve");

  std::vector<std::string> stages;
  for (const auto& name : pipeline::stage_names())
    app.add_subcommand(name, "run the " + name + " stage")->callback([&stages, name] { stages = {name}; });
  app.add_subcommand("run-all", "run every stage; synthesizes inputs when no frame directory is configured")
      ->callback([&stages] { stages = {"run-all"}; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorCode::ConfigInvalid);
  }

  try {
    const pipeline::RunConfig c = load_config(f);
    thread_budget() = c.threads;
    if (stages == std::vector<std::string>{"run-all"}) {
      stages = pipeline::stage_names();
      if (!c.paths.frames.empty()) stages.erase(stages.begin());
    }
    pipeline::run_stages(c, stages);
    if (f.serve) serve(c);
    std::cout << "report: " << (c.out() / "report.txt").string() << "\n";
    return 0;
  } catch (const Error& e) {
    std::cerr << "rigrecon: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "rigrecon: " << e.what() << "\n";
    return static_cast<int>(ErrorCode::StageFailed);
  }
}
