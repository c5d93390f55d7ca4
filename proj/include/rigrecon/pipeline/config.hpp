#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/json_io.hpp"
#include "rigrecon/geometry/camera.hpp"
#include "rigrecon/matching/verify.hpp"
#include "rigrecon/sfm/bundle.hpp"
#include "rigrecon/splat/gaussian.hpp"
#include "rigrecon/splat/optimize.hpp"

namespace rigrecon::pipeline {

struct Paths {
  std::string output = "out";
  // Inputs. Empty means the artifact the synth stage writes under <output>/synth.
  std::string frames;       // directory with L/, C/, R/ frame files
  std::string board;        // directory with {L,C,R}.json calibration observations
  std::string calibration;  // directory with camera_{L,C,R}.json; empty: <output>/calibration
  std::string matches;      // match manifest
  std::string views;        // directory of training images named <image name>.ppm
  std::string truth;        // synthetic truth manifest, optional
  std::string viewer;       // viewer bundle copied by --serve, optional
};

struct CalibrationConfig {
  int width = 1920;
  int height = 1080;
  double fov_deg = 160.0;  // horizontal; initial focal = (width / 2) / tan(fov / 2)
  int max_iterations = 200;
};

struct SyncConfig {
  int bound = 60;
  double fps = 120.0;
};

struct MatchConfig {
  int window = 5;
  int all_pairs_cap = 2000;
  int keypoint_budget = matching::kKeypointBudget;
  matching::RansacOptions ransac;
};

struct SfmConfig {
  sfm::RigPrior prior;
  double huber_px = 2.0;
  double max_reprojection_px = 4.0;
};

struct SplatConfig {
  int iterations = 300;
  double ssim_weight = 0.2;
  splat::LearningRates lr;
  splat::SeedOptions seed;
  int heldout_stride = 8;  // every stride-th registered view with an image is held out
  int max_train_views = 16;
  int heldout_every = 10;
  double background = 0.0;
};

struct Ablation {
  bool disable_calibration = false;
  bool disable_sync = false;
  bool disable_custom_matching = false;
  bool disable_pose_priors = false;
};

struct SynthConfig {
  int triplets = 0;  // 0: select.k
  double pixel_noise = 0.3;
  double outlier_rate = 0.0;
  double speed_mps = 1.2;
  int frames_per_triplet = 3;
  double height_min = 0.12;
  double height_max = 0.30;
  double rotation_jitter_deg = 0.5;
  double lateral_jitter_m = 0.005;
  int num_points = 3000;
  int track_lifetime = 0;
  double view_scale = 0.05;  // training image size relative to the sensor
  int frames = 160;
  double frame_scale = 0.05;     // frame size relative to the sensor
  double frame_focal_px = 120.0;  // sets rows per frame together with speed and height
  int offset_left = 10;
  int offset_right = -5;
  double blur_fraction = 0.3;
  double frame_noise = 0.01;
  int board_views = 40;
  double board_noise = 0.25;
};

struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 0;
  int k = 250;
  Paths paths;
  CalibrationConfig calibration;
  SyncConfig sync;
  MatchConfig matching;
  SfmConfig sfm;
  SplatConfig splat;
  Ablation ablation;
  SynthConfig synth;

  std::filesystem::path out() const { return paths.output; }
  std::filesystem::path input(const std::string& configured, const std::filesystem::path& fallback) const {
    return configured.empty() ? out() / fallback : std::filesystem::path(configured);
  }
  std::filesystem::path frames_dir() const { return input(paths.frames, "synth/frames"); }
  std::filesystem::path board_dir() const { return input(paths.board, "synth/board"); }
  std::filesystem::path calibration_dir() const { return input(paths.calibration, "calibration"); }
  std::filesystem::path matches_manifest() const { return input(paths.matches, "synth/matches/manifest.json"); }
  std::filesystem::path views_dir() const { return input(paths.views, "synth/views"); }
  std::filesystem::path truth_manifest() const { return input(paths.truth, "synth/truth.json"); }
  int synth_triplets() const { return synth.triplets > 0 ? synth.triplets : k; }

  /// Initial pinhole guess used by calibration and, with calibration
  /// disabled, by every later stage.
  geometry::CameraModel initial_camera() const {
    geometry::CameraModel m;
    m.intr.width = calibration.width;
    m.intr.height = calibration.height;
    m.intr.fx = m.intr.fy = 0.5 * calibration.width / std::tan(geometry::deg2rad(0.5 * calibration.fov_deg));
    m.intr.cx = 0.5 * (calibration.width - 1);
    m.intr.cy = 0.5 * (calibration.height - 1);
    return m;
  }
};

inline Json vec3_json(const geometry::Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline Json config_to_json(const RunConfig& c) {
  const auto& p = c.paths;
  const auto& m = c.matching;
  const auto& sp = c.splat;
  const auto& sy = c.synth;
  return Json{
      {"seed", c.seed},
      {"threads", c.threads},
      {"k", c.k},
      {"paths",
       {{"output", p.output}, {"frames", p.frames}, {"board", p.board}, {"calibration", p.calibration},
        {"matches", p.matches}, {"views", p.views}, {"truth", p.truth}, {"viewer", p.viewer}}},
      {"calibration",
       {{"width", c.calibration.width}, {"height", c.calibration.height}, {"fov_deg", c.calibration.fov_deg},
        {"max_iterations", c.calibration.max_iterations}}},
      {"sync", {{"bound", c.sync.bound}, {"fps", c.sync.fps}}},
      {"matching",
       {{"window", m.window},
        {"all_pairs_cap", m.all_pairs_cap},
        {"keypoint_budget", m.keypoint_budget},
        {"ransac_threshold_px", m.ransac.threshold_px},
        {"ransac_confidence", m.ransac.confidence},
        {"ransac_max_iterations", m.ransac.max_iterations},
        {"min_inliers", m.ransac.min_inliers}}},
      {"sfm",
       {{"t_lc", vec3_json(c.sfm.prior.t_lc)},
        {"t_cr", vec3_json(c.sfm.prior.t_cr)},
        {"weight_t", c.sfm.prior.weight_t},
        {"weight_R", c.sfm.prior.weight_R},
        {"huber_px", c.sfm.huber_px},
        {"max_reprojection_px", c.sfm.max_reprojection_px}}},
      {"splat",
       {{"iterations", sp.iterations},
        {"ssim_weight", sp.ssim_weight},
        {"lr_mu", sp.lr.mu},
        {"lr_log_scale", sp.lr.log_scale},
        {"lr_rotation", sp.lr.rotation},
        {"lr_color", sp.lr.color},
        {"lr_alpha_logit", sp.lr.alpha_logit},
        {"init_alpha", sp.seed.alpha},
        {"fallback_scale", sp.seed.fallback_scale},
        {"heldout_stride", sp.heldout_stride},
        {"max_train_views", sp.max_train_views},
        {"heldout_every", sp.heldout_every},
        {"background", sp.background}}},
      {"ablation",
       {{"disable_calibration", c.ablation.disable_calibration},
        {"disable_sync", c.ablation.disable_sync},
        {"disable_custom_matching", c.ablation.disable_custom_matching},
        {"disable_pose_priors", c.ablation.disable_pose_priors}}},
      {"synth",
       {{"triplets", sy.triplets},
        {"pixel_noise", sy.pixel_noise},
        {"outlier_rate", sy.outlier_rate},
        {"speed_mps", sy.speed_mps},
        {"frames_per_triplet", sy.frames_per_triplet},
        {"height_min", sy.height_min},
        {"height_max", sy.height_max},
        {"rotation_jitter_deg", sy.rotation_jitter_deg},
        {"lateral_jitter_m", sy.lateral_jitter_m},
        {"num_points", sy.num_points},
        {"track_lifetime", sy.track_lifetime},
        {"view_scale", sy.view_scale},
        {"frames", sy.frames},
        {"frame_scale", sy.frame_scale},
        {"frame_focal_px", sy.frame_focal_px},
        {"offset_left", sy.offset_left},
        {"offset_right", sy.offset_right},
        {"blur_fraction", sy.blur_fraction},
        {"frame_noise", sy.frame_noise},
        {"board_views", sy.board_views},
        {"board_noise", sy.board_noise}}},
  };
}

namespace detail {

// Every key of `doc` must exist in `ref`, recursively through objects.
inline void check_known_keys(const Json& doc, const Json& ref, const std::string& prefix) {
  if (!doc.is_object()) fail(ErrorCode::ConfigInvalid, "'" + (prefix.empty() ? "<root>" : prefix) + "' must be an object");
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!ref.contains(it.key())) fail(ErrorCode::ConfigInvalid, "unknown config key '" + key + "'");
    if (ref[it.key()].is_object()) check_known_keys(it.value(), ref[it.key()], key);
  }
}

template <typename T>
T field(const Json& doc, const char* section, const char* key) {
  const Json& j = section ? doc.at(section) : doc;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    fail(ErrorCode::ConfigInvalid,
         "config key '" + (section ? std::string(section) + "." : std::string()) + key + "' has the wrong type");
  }
}

inline geometry::Vec3 vec3_field(const Json& doc, const char* section, const char* key) {
  const auto v = field<std::vector<double>>(doc, section, key);
  if (v.size() != 3) fail(ErrorCode::ConfigInvalid, std::string(section) + "." + key + " needs three entries");
  return {v[0], v[1], v[2]};
}

}  // namespace detail

inline void validate(const RunConfig& c) {
  auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::ConfigInvalid, what); };
  check(c.k >= 2, "k must be at least 2");
  check(c.threads >= 0, "threads must be >= 0");
  check(!c.paths.output.empty(), "paths.output must be set");
  check(c.calibration.width > 0 && c.calibration.height > 0, "calibration sensor size must be positive");
  check(c.calibration.fov_deg > 0.0 && c.calibration.fov_deg < 180.0, "calibration.fov_deg must lie in (0, 180)");
  check(c.calibration.max_iterations >= 1, "calibration.max_iterations must be positive");
  check(c.sync.bound >= 0 && c.sync.fps > 0.0, "sync.bound must be >= 0 and sync.fps > 0");
  check(c.matching.window >= 0, "matching.window must be >= 0");
  check(c.matching.all_pairs_cap >= 1 && c.matching.keypoint_budget >= 1, "matching caps must be positive");
  check(c.matching.ransac.threshold_px > 0.0 && c.matching.ransac.confidence > 0.0 &&
            c.matching.ransac.confidence < 1.0 && c.matching.ransac.max_iterations >= 1 &&
            c.matching.ransac.min_inliers >= 8,
        "RANSAC settings out of range");
  check(c.sfm.prior.weight_t >= 0.0 && c.sfm.prior.weight_R >= 0.0, "prior weights must be >= 0");
  check(c.sfm.max_reprojection_px > 0.0, "sfm.max_reprojection_px must be positive");
  check(c.splat.iterations >= 0 && c.splat.heldout_stride >= 2 && c.splat.max_train_views >= 2 &&
            c.splat.heldout_every >= 1,
        "splat iteration and view settings out of range");
  check(c.splat.ssim_weight >= 0.0 && c.splat.ssim_weight <= 1.0, "splat.ssim_weight must lie in [0, 1]");
  check(c.splat.seed.alpha > 0.0 && c.splat.seed.alpha < 1.0 && c.splat.seed.fallback_scale > 0.0,
        "splat seeding settings out of range");
  const auto& s = c.synth;
  check(s.triplets == 0 || s.triplets >= 2, "synth.triplets must be 0 or >= 2");
  check(s.frames >= 2 && s.board_views >= 4, "synth needs >= 2 frames and >= 4 board views");
  check(s.view_scale > 0.0 && s.view_scale <= 1.0 && s.frame_scale > 0.0 && s.frame_scale <= 1.0,
        "synth scales must lie in (0, 1]");
  check(std::abs(s.offset_left) <= 60 && std::abs(s.offset_right) <= 60, "synth offsets must be within 60 frames");
  check(s.blur_fraction >= 0.0 && s.blur_fraction <= 1.0, "synth.blur_fraction must lie in [0, 1]");
}

/// Defaults, overlaid with `doc` (unknown keys rejected), then validated.
inline RunConfig config_from_json(const Json& doc) {
  Json j = config_to_json(RunConfig{});
  detail::check_known_keys(doc, j, "");
  j.merge_patch(doc);
  using detail::field;
  RunConfig c;
  c.seed = field<std::uint64_t>(j, nullptr, "seed");
  c.threads = field<int>(j, nullptr, "threads");
  c.k = field<int>(j, nullptr, "k");
  auto& p = c.paths;
  p.output = field<std::string>(j, "paths", "output");
  p.frames = field<std::string>(j, "paths", "frames");
  p.board = field<std::string>(j, "paths", "board");
  p.calibration = field<std::string>(j, "paths", "calibration");
  p.matches = field<std::string>(j, "paths", "matches");
  p.views = field<std::string>(j, "paths", "views");
  p.truth = field<std::string>(j, "paths", "truth");
  p.viewer = field<std::string>(j, "paths", "viewer");
  c.calibration.width = field<int>(j, "calibration", "width");
  c.calibration.height = field<int>(j, "calibration", "height");
  c.calibration.fov_deg = field<double>(j, "calibration", "fov_deg");
  c.calibration.max_iterations = field<int>(j, "calibration", "max_iterations");
  c.sync.bound = field<int>(j, "sync", "bound");
  c.sync.fps = field<double>(j, "sync", "fps");
  auto& m = c.matching;
  m.window = field<int>(j, "matching", "window");
  m.all_pairs_cap = field<int>(j, "matching", "all_pairs_cap");
  m.keypoint_budget = field<int>(j, "matching", "keypoint_budget");
  m.ransac.threshold_px = field<double>(j, "matching", "ransac_threshold_px");
  m.ransac.confidence = field<double>(j, "matching", "ransac_confidence");
  m.ransac.max_iterations = field<int>(j, "matching", "ransac_max_iterations");
  m.ransac.min_inliers = field<int>(j, "matching", "min_inliers");
  c.sfm.prior.t_lc = detail::vec3_field(j, "sfm", "t_lc");
  c.sfm.prior.t_cr = detail::vec3_field(j, "sfm", "t_cr");
  c.sfm.prior.weight_t = field<double>(j, "sfm", "weight_t");
  c.sfm.prior.weight_R = field<double>(j, "sfm", "weight_R");
  c.sfm.huber_px = field<double>(j, "sfm", "huber_px");
  c.sfm.max_reprojection_px = field<double>(j, "sfm", "max_reprojection_px");
  auto& sp = c.splat;
  sp.iterations = field<int>(j, "splat", "iterations");
  sp.ssim_weight = field<double>(j, "splat", "ssim_weight");
  sp.lr.mu = field<double>(j, "splat", "lr_mu");
  sp.lr.log_scale = field<double>(j, "splat", "lr_log_scale");
  sp.lr.rotation = field<double>(j, "splat", "lr_rotation");
  sp.lr.color = field<double>(j, "splat", "lr_color");
  sp.lr.alpha_logit = field<double>(j, "splat", "lr_alpha_logit");
  sp.seed.alpha = field<double>(j, "splat", "init_alpha");
  sp.seed.fallback_scale = field<double>(j, "splat", "fallback_scale");
  sp.heldout_stride = field<int>(j, "splat", "heldout_stride");
  sp.max_train_views = field<int>(j, "splat", "max_train_views");
  sp.heldout_every = field<int>(j, "splat", "heldout_every");
  sp.background = field<double>(j, "splat", "background");
  auto& a = c.ablation;
  a.disable_calibration = field<bool>(j, "ablation", "disable_calibration");
  a.disable_sync = field<bool>(j, "ablation", "disable_sync");
  a.disable_custom_matching = field<bool>(j, "ablation", "disable_custom_matching");
  a.disable_pose_priors = field<bool>(j, "ablation", "disable_pose_priors");
  auto& s = c.synth;
  s.triplets = field<int>(j, "synth", "triplets");
  s.pixel_noise = field<double>(j, "synth", "pixel_noise");
  s.outlier_rate = field<double>(j, "synth", "outlier_rate");
  s.speed_mps = field<double>(j, "synth", "speed_mps");
  s.frames_per_triplet = field<int>(j, "synth", "frames_per_triplet");
  s.height_min = field<double>(j, "synth", "height_min");
  s.height_max = field<double>(j, "synth", "height_max");
  s.rotation_jitter_deg = field<double>(j, "synth", "rotation_jitter_deg");
  s.lateral_jitter_m = field<double>(j, "synth", "lateral_jitter_m");
  s.num_points = field<int>(j, "synth", "num_points");
  s.track_lifetime = field<int>(j, "synth", "track_lifetime");
  s.view_scale = field<double>(j, "synth", "view_scale");
  s.frames = field<int>(j, "synth", "frames");
  s.frame_scale = field<double>(j, "synth", "frame_scale");
  s.frame_focal_px = field<double>(j, "synth", "frame_focal_px");
  s.offset_left = field<int>(j, "synth", "offset_left");
  s.offset_right = field<int>(j, "synth", "offset_right");
  s.blur_fraction = field<double>(j, "synth", "blur_fraction");
  s.frame_noise = field<double>(j, "synth", "frame_noise");
  s.board_views = field<int>(j, "synth", "board_views");
  s.board_noise = field<double>(j, "synth", "board_noise");
  validate(c);
  return c;
}

/// Reads a config document. Comments (// and /* */) are allowed.
inline Json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::MissingInput, "config file not found: " + path.string());
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const Json::exception& e) {
    fail(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
}

/// Applies "section.key=value" where value is parsed as JSON, falling back
/// to a plain string.
inline void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    fail(ErrorCode::ConfigInvalid, "override '" + assignment + "' is not of the form key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace rigrecon::pipeline
