#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/json_io.hpp"
#include "rigrecon/core/parallel.hpp"
#include "rigrecon/core/random.hpp"
#include "rigrecon/geometry/undistort_image.hpp"
#include "rigrecon/imaging/image.hpp"
#include "rigrecon/matching/matches.hpp"
#include "rigrecon/matching/pairs.hpp"
#include "rigrecon/matching/tracks.hpp"
#include "rigrecon/matching/triplets.hpp"
#include "rigrecon/matching/verify.hpp"
#include "rigrecon/pipeline/config.hpp"
#include "rigrecon/sfm/calibration.hpp"
#include "rigrecon/sfm/evaluate.hpp"
#include "rigrecon/sfm/incremental.hpp"
#include "rigrecon/sfm/model.hpp"
#include "rigrecon/splat/gaussian.hpp"
#include "rigrecon/splat/metrics.hpp"
#include "rigrecon/splat/optimize.hpp"
#include "rigrecon/splat/render.hpp"
#include "rigrecon/sync/sync.hpp"
#include "rigrecon/synth/board.hpp"
#include "rigrecon/synth/camera_presets.hpp"
#include "rigrecon/synth/rig_scenario.hpp"
#include "rigrecon/synth/scene_view.hpp"
#include "rigrecon/synth/vehicle_pass.hpp"

namespace rigrecon::pipeline {

namespace fs = std::filesystem;

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"synth", "calibrate", "sync",   "select", "match-verify",
                                                 "sfm",   "splat",     "render", "metrics"};
  return names;
}

namespace detail {

inline void require_input(const fs::path& p, const std::string& what) {
  require(fs::exists(p), ErrorCode::MissingInput, what + " not found: " + p.string());
}

inline Json read_input(const fs::path& p, const std::string& what) {
  require_input(p, what);
  return read_json_file(p);
}

inline std::string cam_name(CameraId c) { return std::string(to_string(c)); }

// Frame files of one stream, sorted by name.
inline std::vector<std::string> list_frames(const fs::path& dir) {
  require_input(dir, "frame directory");
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::array<geometry::CameraModel, 3> load_cameras(const RunConfig& c) {
  std::array<geometry::CameraModel, 3> out;
  for (CameraId cam : kAllCameras)
    out[index_of(cam)] = geometry::camera_model_from_json(
        read_input(c.calibration_dir() / ("camera_" + cam_name(cam) + ".json"), "calibration"));
  return out;
}

// The rectified images keep the calibrated K.
inline std::array<geometry::CameraIntrinsics, 3> rectified_intrinsics(const RunConfig& c) {
  const auto cams = load_cameras(c);
  return {cams[0].intr, cams[1].intr, cams[2].intr};
}

inline std::vector<std::string> image_names(int n_triplets) {
  std::vector<std::string> names;
  for (int id = 0; id < 3 * n_triplets; ++id) {
    const auto key = matching::ImageKey::from_id(id);
    names.push_back(synth::image_name(key.camera, key.index));
  }
  return names;
}

inline imaging::Image to_rgb(const imaging::Image& img) {
  if (img.channels == 3) return img;
  imaging::Image out(img.width, img.height, 3);
  for (std::size_t i = 0; i < img.pixel_count(); ++i)
    for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = img.data[i * img.channels];
  return out;
}

// Infinity has no JSON number; the report writes it as a string.
inline Json number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline sfm::SparseModel read_model(const RunConfig& c) {
  const fs::path dir = c.out() / "sfm";
  Json doc = read_input(dir / "cameras.json", "sparse model");
  doc["images"] = read_input(dir / "images.json", "sparse model images");
  doc["points"] = read_input(dir / "points.json", "sparse model points");
  doc["stats"] = read_input(dir / "stats.json", "sparse model stats");
  return sfm::model_from_json(doc);
}

struct SplatView {
  std::string name;
  std::string role;  // "train" or "heldout"
  fs::path image;
  splat::Camera camera;
};

inline std::vector<SplatView> read_splat_views(const RunConfig& c) {
  std::vector<SplatView> out;
  for (const Json& v : json_get<Json>(read_input(c.out() / "splat/views.json", "splat view list"), "views")) {
    SplatView s;
    s.name = json_get<std::string>(v, "name");
    s.role = json_get<std::string>(v, "role");
    s.image = (c.out() / json_get<std::string>(v, "image")).string();
    s.camera.pose = geometry::pose_from_json(v);
    s.camera.intr = geometry::camera_model_from_json(json_get<Json>(v, "camera")).intr;
    out.push_back(std::move(s));
  }
  return out;
}

inline fs::path render_path(const RunConfig& c, const std::string& name) { return c.out() / "render" / (name + ".ppm"); }

}  // namespace detail

/// Synthetic dataset: frame streams, board observations, match documents,
/// posed training views and the truth manifest, all under <output>/synth.
inline Json run_synth(const RunConfig& c) {
  const fs::path dir = c.out() / "synth";
  const auto& s = c.synth;
  const geometry::CameraModel camera = synth::rig_camera();
  Json report;

  synth::VehiclePassConfig vp;
  vp.width = static_cast<int>(std::lround(camera.intr.width * s.frame_scale));
  vp.height = static_cast<int>(std::lround(camera.intr.height * s.frame_scale));
  // Long enough that the synced range still holds k triplets.
  vp.frames = std::max(s.frames, c.k + std::abs(s.offset_left) + std::abs(s.offset_right) + 8);
  vp.cruise_speed = synth::rows_per_frame(s.speed_mps, c.sync.fps, s.frame_focal_px, 0.5 * (s.height_min + s.height_max));
  vp.noise_sigma = s.frame_noise;
  vp.offset_left = s.offset_left;
  vp.offset_right = s.offset_right;
  vp.blur_fraction = s.blur_fraction;
  vp.seed = derive_seed(c.seed, {10});
  synth::write_vehicle_pass(synth::generate_vehicle_pass(vp), dir / "frames");
  report["frames"] = Json{{"per_stream", vp.frames},
                          {"width", vp.width},
                          {"height", vp.height},
                          {"cruise_rows_per_frame", vp.cruise_speed},
                          {"offset_left", vp.offset_left},
                          {"offset_right", vp.offset_right}};

  Json board = Json::object();
  for (CameraId cam : kAllCameras) {
    const auto views = synth::generate_board_views(sfm::BoardGeometry{}, camera, s.board_views, s.board_noise,
                                                   derive_seed(c.seed, {20, static_cast<std::uint64_t>(index_of(cam))}));
    write_json_file(dir / "board" / (detail::cam_name(cam) + ".json"), sfm::observations_to_json(views.observations));
    write_json_file(dir / "board" / ("truth_" + detail::cam_name(cam) + ".json"), geometry::camera_model_to_json(camera));
    board[detail::cam_name(cam)] = Json{{"views", s.board_views}, {"corners", views.observations.size()}};
  }
  report["board"] = board;

  synth::RigScenario sc;
  sc.t_lc = c.sfm.prior.t_lc;
  sc.t_cr = c.sfm.prior.t_cr;
  sc.speed_mps = s.speed_mps;
  sc.fps = c.sync.fps;
  sc.frames_per_triplet = s.frames_per_triplet;
  sc.height_min = s.height_min;
  sc.height_max = s.height_max;
  sc.rotation_jitter_deg = s.rotation_jitter_deg;
  sc.lateral_jitter_m = s.lateral_jitter_m;
  sc.num_points = s.num_points;
  sc.pixel_noise = s.pixel_noise;
  sc.outlier_rate = s.outlier_rate;
  sc.track_lifetime = s.track_lifetime;
  const int n = c.synth_triplets();
  const auto tracks = synth::generate_tracks(sc, n, derive_seed(c.seed, {30}));
  write_json_file(dir / "truth.json", synth::truth_manifest(tracks));

  // Documents for every pair either schedule may request.
  std::vector<matching::ImagePair> pairs = matching::schedule_pairs(n, c.matching.window);
  std::set<std::pair<int, int>> seen;
  for (const auto& p : pairs) seen.insert({p.a.id(), p.b.id()});
  for (const auto& p : matching::schedule_all_pairs(n, c.matching.all_pairs_cap))
    if (seen.insert({p.a.id(), p.b.id()}).second && seen.count({p.b.id(), p.a.id()}) == 0) pairs.push_back(p);
  const int docs = synth::write_match_documents(tracks, pairs, dir / "matches");
  synth::write_scene_views(tracks, s.view_scale, dir / "views");
  report["tracks"] = Json{{"triplets", n},
                          {"images", tracks.num_images()},
                          {"points", tracks.points.size()},
                          {"tracks", tracks.tracks.tracks.size()},
                          {"mean_track_length", tracks.tracks.mean_track_length()},
                          {"pair_documents", docs},
                          {"view_scale", s.view_scale}};
  return report;
}

/// Per-camera calibration from board observations; with calibration
/// disabled, writes the initial pinhole guess with zero distortion.
inline Json run_calibrate(const RunConfig& c) {
  const fs::path dir = c.calibration_dir();
  Json report{{"disabled", c.ablation.disable_calibration}};
  for (CameraId cam : kAllCameras) {
    const std::string name = detail::cam_name(cam);
    geometry::CameraModel model = c.initial_camera();
    Json cam_report{{"initial_focal_px", model.intr.fx}};
    if (!c.ablation.disable_calibration) {
      const auto obs = sfm::observations_from_json(detail::read_input(c.board_dir() / (name + ".json"), "board observations"));
      sfm::CalibrationOptions opts;
      opts.max_iterations = c.calibration.max_iterations;
      const auto res = sfm::calibrate(obs, model, opts);
      model = res.model;
      cam_report.update(Json{{"rms_px", res.rms},
                             {"initial_rms_px", res.initial_rms},
                             {"iterations", res.iterations},
                             {"gradient_norm", res.gradient_norm},
                             {"frames_used", res.frames.size()}});
      const fs::path truth = c.board_dir() / ("truth_" + name + ".json");
      if (fs::exists(truth)) {
        const auto t = geometry::camera_model_from_json(read_json_file(truth));
        cam_report["truth"] = Json{{"fx_rel_error", std::abs(model.intr.fx / t.intr.fx - 1.0)},
                                   {"fy_rel_error", std::abs(model.intr.fy / t.intr.fy - 1.0)},
                                   {"cx_error_px", std::abs(model.intr.cx - t.intr.cx)},
                                   {"cy_error_px", std::abs(model.intr.cy - t.intr.cy)},
                                   {"mapping_difference_px", sfm::distortion_mapping_difference(model, t, 1.5)}};
      }
    }
    cam_report["model"] = geometry::camera_model_to_json(model);
    write_json_file(dir / ("camera_" + name + ".json"), geometry::camera_model_to_json(model));
    report[name] = cam_report;
  }
  return report;
}

/// Shift signals of the three streams and the sync manifest.
inline Json run_sync(const RunConfig& c) {
  const fs::path frames = c.frames_dir(), dir = c.out() / "sync";
  std::array<std::vector<std::string>, 3> names;
  std::array<sync::ShiftSignal, 3> signals;
  for (CameraId cam : kAllCameras) {
    const auto ci = static_cast<std::size_t>(index_of(cam));
    const fs::path sub = frames / detail::cam_name(cam);
    names[ci] = detail::list_frames(sub);
    const sync::FrameSource src{static_cast<int>(names[ci].size()),
                                [&, ci](int i) { return imaging::read_pnm(sub / names[ci][static_cast<std::size_t>(i)]); }};
    signals[ci] = sync::build_shift_signal(src, cam, {}, c.sync.fps);
    write_json_file(dir / ("signal_" + detail::cam_name(cam) + ".json"), sync::shift_signal_to_json(signals[ci]));
    for (auto& n : names[ci]) n = detail::cam_name(cam) + "/" + n;
  }
  sync::SyncResult res;
  if (c.ablation.disable_sync) {
    res.presync_l1_left = res.residual_l1_left = sync::l1_alignment_loss(signals[1], signals[0], 0);
    res.presync_l1_right = res.residual_l1_right = sync::l1_alignment_loss(signals[1], signals[2], 0);
    res.trimmed_length = static_cast<int>(std::min({names[0].size(), names[1].size(), names[2].size()}));
    res.warnings.push_back("sync disabled: streams paired by frame number");
  } else {
    res = sync::synchronize_three(signals[0], signals[1], signals[2], c.sync.bound);
  }
  write_json_file(dir / "manifest.json", sync::sync_manifest(res, names[0], names[1], names[2]));
  Json report = sync::sync_result_to_json(res);
  report["disabled"] = c.ablation.disable_sync;
  for (int i = 0; i < 3; ++i) report["degenerate_pairs"][detail::cam_name(kAllCameras[i])] = signals[i].degenerate_pairs;
  const fs::path truth = frames / "truth.json";
  if (fs::exists(truth)) {
    const Json t = read_json_file(truth);
    report["truth"] = Json{{"offset_left", t.at("offset_left")},
                           {"offset_right", t.at("offset_right")},
                           {"exact", t.at("offset_left").get<int>() == res.offset_left &&
                                         t.at("offset_right").get<int>() == res.offset_right}};
  }
  return report;
}

/// Sharpest triplet per bin, plus rectified copies of the selected frames
/// named by selection position (<cam>/<NNNNNN>.pgm).
inline Json run_select(const RunConfig& c) {
  const fs::path frames = c.frames_dir(), dir = c.out() / "select";
  auto cands = matching::triplets_from_manifest(detail::read_input(c.out() / "sync/manifest.json", "sync manifest"));
  matching::score_triplets(cands, [&](const std::string& name) { return imaging::read_pnm(frames / name); });
  const auto sel = matching::select_triplets(cands, c.k);
  const auto cams = detail::load_cameras(c);

  std::set<std::string> blurred;
  const fs::path truth = frames / "truth.json";
  const bool have_truth = fs::exists(truth);
  if (have_truth) {
    const Json t = read_json_file(truth);
    for (CameraId cam : kAllCameras)
      for (int i : t.at("streams").at(detail::cam_name(cam)).at("blurred_frames").get<std::vector<int>>())
        blurred.insert(detail::cam_name(cam) + "/" + synth::frame_name(i));
  }

  Json list = Json::array();
  int with_blur = 0;
  for (std::size_t j = 0; j < sel.size(); ++j) {
    const auto& t = sel[j];
    Json entry{{"ordinal", j}, {"index", t.index}, {"score", t.score}};
    bool any_blur = false;
    for (CameraId cam : kAllCameras) {
      const auto ci = static_cast<std::size_t>(index_of(cam));
      entry[detail::cam_name(cam)] = t.frames[ci];
      any_blur = any_blur || blurred.count(t.frames[ci]) > 0;
      const imaging::Image img = imaging::read_pnm(frames / t.frames[ci]);
      const double scale = static_cast<double>(img.width) / cams[ci].intr.width;
      const auto K = cams[ci].intr.scaled(scale);
      require(K.width == img.width && std::abs(K.height - img.height) <= 1, ErrorCode::ConfigInvalid,
              "frames of " + detail::cam_name(cam) + " do not share the calibrated sensor aspect ratio");
      imaging::write_pnm(dir / "rectified" / (synth::image_name(cam, static_cast<int>(j)) + ".pgm"),
                         geometry::undistort_image(img, K, cams[ci].dist, K));
    }
    with_blur += any_blur;
    list.push_back(std::move(entry));
  }
  write_json_file(dir / "selection.json", Json{{"k", c.k}, {"candidates", cands.size()}, {"triplets", list}});
  Json report{{"k", c.k}, {"candidates", cands.size()}, {"rectified_intrinsics", "calibrated K reused"}};
  std::vector<int> idx;
  for (const auto& t : sel) idx.push_back(t.index);
  report["selected_indices"] = idx;
  if (have_truth) report["truth"] = Json{{"triplets_with_blurred_frame", with_blur}};
  return report;
}

/// Pair schedule, match ingestion, RANSAC verification and track building.
inline Json run_match_verify(const RunConfig& c) {
  const fs::path dir = c.out() / "matches";
  const Json selection = detail::read_input(c.out() / "select/selection.json", "triplet selection");
  const int n = static_cast<int>(json_get<Json>(selection, "triplets").size());
  const auto names = detail::image_names(n);
  const auto pairs = c.ablation.disable_custom_matching ? matching::schedule_all_pairs(n, c.matching.all_pairs_cap)
                                                        : matching::schedule_pairs(n, c.matching.window);
  std::map<std::string, int> per_class;
  for (const auto& p : pairs) ++per_class[std::string(matching::to_string(p.cls))];
  if (!c.ablation.disable_custom_matching)
    require(per_class.count("cross_LR") == 0, ErrorCode::StageFailed, "custom schedule produced L-R pairs");

  detail::require_input(c.matches_manifest(), "match manifest");
  const matching::FileMatchProvider provider(c.matches_manifest());
  const auto ingested = matching::ingest_matches(pairs, names, provider, c.matching.keypoint_budget);
  const auto verified =
      matching::verify_all(ingested.sets, ingested.keypoints, detail::rectified_intrinsics(c), c.matching.ransac, c.seed);
  const auto tracks = matching::build_tracks(verified.kept, ingested.keypoints);
  matching::check_tracks(tracks);
  Json doc = matching::tracks_to_json(tracks);
  doc["names"] = names;
  write_json_file(dir / "tracks.json", doc);

  std::map<std::string, int> reasons;
  Json dropped = Json::array();
  for (const auto& d : verified.dropped) {
    ++reasons[d.reason];
    dropped.push_back({names[static_cast<std::size_t>(d.image_a)], names[static_cast<std::size_t>(d.image_b)], d.reason});
  }
  return Json{{"triplets", n},
              {"schedule", c.ablation.disable_custom_matching ? "all_pairs" : "windowed"},
              {"pairs_scheduled", pairs.size()},
              {"pairs_per_class", per_class},
              {"pairs_kept", verified.kept.size()},
              {"pairs_dropped", verified.dropped.size()},
              {"drop_reasons", reasons},
              {"dropped", dropped},
              {"tracks", tracks.tracks.size()},
              {"mean_track_length", tracks.mean_track_length()},
              {"conflicts_resolved", tracks.conflicts_resolved}};
}

/// Incremental reconstruction with rig-aware bundle adjustment.
inline Json run_sfm(const RunConfig& c) {
  const fs::path dir = c.out() / "sfm";
  const Json doc = detail::read_input(c.out() / "matches/tracks.json", "track set");
  const auto tracks = matching::tracks_from_json(doc);
  const auto names = json_get<std::vector<std::string>>(doc, "names");
  sfm::SfmOptions opts;
  opts.prior = c.ablation.disable_pose_priors ? sfm::RigPrior::disabled() : c.sfm.prior;
  if (c.ablation.disable_pose_priors) {
    opts.prior.t_lc = c.sfm.prior.t_lc;
    opts.prior.t_cr = c.sfm.prior.t_cr;
  }
  opts.ba.huber_px = c.sfm.huber_px;
  opts.max_reprojection_px = c.sfm.max_reprojection_px;
  opts.ransac = c.matching.ransac;
  opts.seed = c.seed;
  const auto res = sfm::reconstruct(tracks, names, detail::rectified_intrinsics(c), opts);
  const Json model = sfm::model_to_json(res.model);
  write_json_file(dir / "cameras.json", Json{{"cameras", model.at("cameras")}});
  write_json_file(dir / "images.json", model.at("images"));
  write_json_file(dir / "points.json", model.at("points"));
  write_json_file(dir / "stats.json", model.at("stats"));
  sfm::write_points_ply(res.model, dir / "points.ply");

  // Self-consistency: stats recomputed from the serialized model.
  const auto back = detail::read_model(c);
  Json failed = Json::array();
  for (const auto& [id, why] : res.failed) failed.push_back({names[static_cast<std::size_t>(id)], why});
  Json report{{"stats", sfm::stats_to_json(res.model.stats)},
              {"stats_consistent", sfm::stats_equal(sfm::model_stats(back), back.stats)},
              {"images", res.model.images.size()},
              {"pose_priors", opts.prior.enabled()},
              {"seed_pair", {names[static_cast<std::size_t>(res.seed.image_a)], names[static_cast<std::size_t>(res.seed.image_b)]}},
              {"failed_images", failed},
              {"bundle_adjustments", res.bundle_reports.size()},
              {"warnings", res.warnings}};
  const fs::path truth = c.truth_manifest();
  if (fs::exists(truth)) {
    const auto t = sfm::trajectory_truth(read_json_file(truth));
    if (t.poses.size() == res.model.images.size())
      report["truth"] = sfm::trajectory_metrics_to_json(sfm::evaluate_trajectory(res.model, t));
  }
  return report;
}

/// Seeds one Gaussian per sparse point and optimizes against the posed views.
inline Json run_splat(const RunConfig& c) {
  const fs::path dir = c.out() / "splat";
  const auto model = detail::read_model(c);
  const fs::path views_dir = c.views_dir();
  detail::require_input(views_dir, "view directory");

  std::vector<int> ids;
  std::vector<fs::path> files;
  for (std::size_t id = 0; id < model.images.size(); ++id) {
    if (!model.images[id].registered) continue;
    for (const char* ext : {".ppm", ".pgm"}) {
      const fs::path f = views_dir / (model.images[id].name + ext);
      if (fs::exists(f)) {
        ids.push_back(static_cast<int>(id));
        files.push_back(f);
        break;
      }
    }
  }
  require(ids.size() >= 3, ErrorCode::MissingInput, "splat needs images for at least three registered views");

  const int stride = c.splat.heldout_stride;
  std::vector<std::size_t> train, heldout;
  for (std::size_t i = 0; i < ids.size(); ++i) (i % stride == static_cast<std::size_t>(stride - 1) ? heldout : train).push_back(i);
  if (static_cast<int>(train.size()) > c.splat.max_train_views) {
    std::vector<std::size_t> kept;
    const int m = c.splat.max_train_views;
    for (int k = 0; k < m; ++k) kept.push_back(train[static_cast<std::size_t>(k) * (train.size() - 1) / (m - 1)]);
    train = kept;
  }

  std::vector<imaging::Image> images(model.images.size());
  std::vector<splat::View> train_views, heldout_views;
  Json listed = Json::array();
  double pixel_scale = 1.0;
  auto add = [&](std::size_t i, const char* role, std::vector<splat::View>& into) {
    const int id = ids[i];
    splat::View v;
    v.image = detail::to_rgb(imaging::read_pnm(files[i]));
    const auto& K0 = model.intrinsics(id);
    pixel_scale = static_cast<double>(v.image.width) / K0.width;
    v.camera.intr = K0.scaled(pixel_scale);
    require(v.camera.intr.height == v.image.height, ErrorCode::ConfigInvalid,
            "view " + files[i].string() + " does not match the camera aspect ratio");
    v.camera.pose = model.pose(id);
    images[static_cast<std::size_t>(id)] = v.image;
    Json j = geometry::pose_to_json(v.camera.pose);
    j["name"] = model.images[static_cast<std::size_t>(id)].name;
    j["role"] = role;
    j["image"] = fs::relative(files[i], c.out()).generic_string();
    j["camera"] = geometry::camera_model_to_json({v.camera.intr, {}});
    listed.push_back(std::move(j));
    into.push_back(std::move(v));
  };
  for (std::size_t i : train) add(i, "train", train_views);
  for (std::size_t i : heldout) add(i, "heldout", heldout_views);

  splat::SeedOptions seed = c.splat.seed;
  seed.pixel_scale = pixel_scale;
  splat::GaussianCloud cloud = splat::seed_gaussians(model, images, seed);
  cloud.background = geometry::Vec3::Constant(c.splat.background);
  splat::OptimizeOptions opts;
  opts.iterations = c.splat.iterations;
  opts.ssim_weight = c.splat.ssim_weight;
  opts.lr = c.splat.lr;
  opts.heldout_every = c.splat.heldout_every;
  splat::OptimizeReport rep;
  cloud = splat::optimize(std::move(cloud), train_views, heldout_views, opts, &rep);
  splat::export_ply(cloud, dir / "cloud.ply");
  write_json_file(dir / "views.json", Json{{"background", c.splat.background}, {"views", listed}});
  return Json{{"gaussians", cloud.size()},
              {"train_views", train_views.size()},
              {"heldout_views", heldout_views.size()},
              {"image_size", {train_views.front().image.width, train_views.front().image.height}},
              {"initial_loss", rep.initial_loss},
              {"final_loss", rep.final_loss},
              {"iterations", rep.iterations},
              {"stopped_early", rep.stopped_early},
              {"best_heldout_loss", detail::number(rep.best_heldout_loss)},
              {"best_heldout_iteration", rep.best_heldout_iteration}};
}

/// Renders every listed view of the exported cloud to <output>/render/<name>.ppm.
inline Json run_render(const RunConfig& c) {
  splat::GaussianCloud cloud = splat::import_ply(c.out() / "splat/cloud.ply");
  const Json list = detail::read_input(c.out() / "splat/views.json", "splat view list");
  cloud.background = geometry::Vec3::Constant(json_get<double>(list, "background"));
  const auto views = detail::read_splat_views(c);
  for (const auto& v : views) imaging::write_pnm(detail::render_path(c, v.name), splat::render(cloud, v.camera).color);
  return Json{{"rendered", views.size()}, {"gaussians", cloud.size()}};
}

/// PSNR and SSIM of the stored renders against their views.
inline Json run_metrics(const RunConfig& c) {
  Json report;
  for (const char* role : {"heldout", "train"}) {
    Json rows = Json::array();
    double psnr_sum = 0.0, ssim_sum = 0.0;
    int n = 0;
    for (const auto& v : detail::read_splat_views(c)) {
      if (v.role != role) continue;
      detail::require_input(detail::render_path(c, v.name), "render");
      const auto r = imaging::read_pnm(detail::render_path(c, v.name));
      const auto target = imaging::quantize8(detail::to_rgb(imaging::read_pnm(v.image)));
      const double p = splat::psnr(r, target), s = splat::ssim(r, target);
      rows.push_back(Json{{"view", v.name}, {"psnr", detail::number(p)}, {"ssim", s}});
      psnr_sum += p;
      ssim_sum += s;
      ++n;
    }
    report[role] = Json{{"views", rows},
                        {"mean_psnr", n ? detail::number(psnr_sum / n) : Json(nullptr)},
                        {"mean_ssim", n ? Json(ssim_sum / n) : Json(nullptr)}};
  }
  return report;
}

inline Json run_stage(const std::string& name, const RunConfig& c) {
  static const std::map<std::string, std::function<Json(const RunConfig&)>> stages = {
      {"synth", run_synth}, {"calibrate", run_calibrate},       {"sync", run_sync},
      {"select", run_select}, {"match-verify", run_match_verify}, {"sfm", run_sfm},
      {"splat", run_splat},   {"render", run_render},             {"metrics", run_metrics}};
  const auto it = stages.find(name);
  require(it != stages.end(), ErrorCode::ConfigInvalid, "unknown stage '" + name + "'");
  return it->second(c);
}

}  // namespace rigrecon::pipeline
