#pragma once

#include <cmath>
#include <map>
#include <vector>

#include <Eigen/Geometry>

#include "rigrecon/sfm/model.hpp"
#include "rigrecon/synth/rig_scenario.hpp"

namespace rigrecon::sfm {

/// x -> s R x + t
struct Similarity {
  double scale = 1.0;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
  Vec3 apply(const Vec3& x) const { return scale * (R * x) + t; }
};

/// Least-squares similarity mapping `src` onto `dst` (Umeyama).
inline Similarity align_similarity(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  require(src.size() == dst.size() && src.size() >= 3, ErrorCode::InvalidArgument, "alignment needs 3+ pairs");
  Eigen::Matrix3Xd a(3, src.size()), b(3, dst.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    a.col(static_cast<Eigen::Index>(i)) = src[i];
    b.col(static_cast<Eigen::Index>(i)) = dst[i];
  }
  const Eigen::Matrix4d T = Eigen::umeyama(a, b, true);
  Similarity s;
  const Mat3 sR = T.topLeftCorner<3, 3>();
  s.scale = std::cbrt(sR.determinant());
  s.R = sR / s.scale;
  s.t = T.topRightCorner<3, 1>();
  return s;
}

/// Applies x -> s R x + t to the whole model (points and camera poses).
inline void transform_model(SparseModel& m, const Similarity& sim) {
  for (auto& p : m.points) p.xyz = sim.apply(p.xyz);
  for (auto& im : m.images) {
    const Vec3 c = sim.apply(im.pose.center());
    const Mat3 R = im.pose.rotation_matrix() * sim.R.transpose();
    im.pose = geometry::pose_from_center(R, c);
  }
}

/// Model built directly from generator ground truth: true poses, true points,
/// one point per track.
inline SparseModel model_from_truth(const synth::SyntheticTracks& truth) {
  std::array<geometry::CameraIntrinsics, 3> intr{truth.rectified(0), truth.rectified(1), truth.rectified(2)};
  SparseModel m = make_model(truth.tracks.keypoints, truth.names, intr);
  for (std::size_t id = 0; id < m.images.size(); ++id) {
    m.images[id].pose = truth.poses[id];
    m.images[id].registered = true;
  }
  for (std::size_t t = 0; t < truth.tracks.tracks.size(); ++t) {
    const auto& track = truth.tracks.tracks[t];
    const Observation& o = track.front();
    const int pid = truth.keypoint_point[static_cast<std::size_t>(o.image)][static_cast<std::size_t>(o.keypoint)];
    ModelPoint p;
    p.xyz = truth.points[static_cast<std::size_t>(pid)];
    p.rgb = truth.colors[static_cast<std::size_t>(pid)];
    p.track = static_cast<int>(t);
    p.obs = track;
    m.points.push_back(std::move(p));
  }
  m.stats = model_stats(m);
  return m;
}

struct TrajectoryMetrics {
  int registered = 0;
  double trajectory_length = 0.0;
  double center_rmse = 0.0;       // after similarity alignment, truth units
  double mean_center_error = 0.0;
  double baseline_drift = 0.0;    // RMS of aligned per-triplet side offset errors, truth units
  double max_lc_baseline_error = 0.0;  // | |c_L - c_C| - |t_lc| |, model units
  double max_lr_distance_rel_error = 0.0;
  double mean_lc_baseline = 0.0;
  double mean_lr_distance = 0.0;
};

/// Ground-truth poses per image id plus the rig offsets.
struct TrajectoryTruth {
  std::vector<Pose> poses;
  Vec3 t_lc = Vec3::Zero();
  Vec3 t_cr = Vec3::Zero();

  // Summed C-to-C distance between consecutive triplets.
  double trajectory_length() const {
    double len = 0.0;
    for (std::size_t i = 3; i + 1 < poses.size(); i += 3) len += (poses[i + 1].center() - poses[i - 2].center()).norm();
    return len;
  }
};

inline TrajectoryTruth trajectory_truth(const synth::SyntheticTracks& t) {
  return {t.poses, t.scenario.t_lc, t.scenario.t_cr};
}

/// Reads the poses and rig offsets of a synthetic truth manifest.
inline TrajectoryTruth trajectory_truth(const Json& manifest) {
  TrajectoryTruth out;
  for (const Json& img : json_get<Json>(manifest, "images")) out.poses.push_back(geometry::pose_from_json(img));
  auto vec = [&](const char* key) {
    const auto v = json_get<std::vector<double>>(manifest, key);
    require(v.size() == 3, ErrorCode::ParseError, std::string(key) + " must have three entries");
    return Vec3(v[0], v[1], v[2]);
  };
  out.t_lc = vec("t_lc");
  out.t_cr = vec("t_cr");
  return out;
}

/// Compares registered camera centers with the generator's poses.
inline TrajectoryMetrics evaluate_trajectory(const SparseModel& m, const TrajectoryTruth& truth) {
  require(truth.poses.size() == m.images.size(), ErrorCode::InvalidArgument,
          "truth and model disagree on the number of images");
  TrajectoryMetrics out;
  out.trajectory_length = truth.trajectory_length();
  std::vector<Vec3> est, ref;
  std::vector<int> ids;
  for (std::size_t id = 0; id < m.images.size(); ++id) {
    if (!m.images[id].registered) continue;
    est.push_back(m.images[id].pose.center());
    ref.push_back(truth.poses[id].center());
    ids.push_back(static_cast<int>(id));
  }
  out.registered = static_cast<int>(ids.size());
  if (ids.size() < 3) return out;
  const Similarity sim = align_similarity(est, ref);
  std::map<int, Vec3> aligned;
  double sq = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Vec3 a = sim.apply(est[i]);
    aligned[ids[i]] = a;
    const double e = (a - ref[i]).norm();
    sq += e * e;
    sum += e;
  }
  out.center_rmse = std::sqrt(sq / static_cast<double>(ids.size()));
  out.mean_center_error = sum / static_cast<double>(ids.size());

  const double lc = truth.t_lc.norm(), lr = (truth.t_cr - truth.t_lc).norm();
  double drift_sq = 0.0;
  int drift_n = 0, lc_n = 0, lr_n = 0;
  const int n_triplets = static_cast<int>(m.images.size()) / 3;
  for (int t = 0; t < n_triplets; ++t) {
    const int l = 3 * t, c = 3 * t + 1, r = 3 * t + 2;
    for (int side : {l, r}) {
      if (!aligned.count(side) || !aligned.count(c)) continue;
      const Vec3 d_est = aligned[side] - aligned[c];
      const Vec3 d_ref = truth.poses[static_cast<std::size_t>(side)].center() - truth.poses[static_cast<std::size_t>(c)].center();
      drift_sq += (d_est - d_ref).squaredNorm();
      ++drift_n;
    }
    if (m.registered(l) && m.registered(c)) {
      const double d = (m.pose(l).center() - m.pose(c).center()).norm();
      out.max_lc_baseline_error = std::max(out.max_lc_baseline_error, std::abs(d - lc));
      out.mean_lc_baseline += d;
      ++lc_n;
    }
    if (m.registered(l) && m.registered(r)) {
      const double d = (m.pose(l).center() - m.pose(r).center()).norm();
      out.max_lr_distance_rel_error = std::max(out.max_lr_distance_rel_error, std::abs(d - lr) / lr);
      out.mean_lr_distance += d;
      ++lr_n;
    }
  }
  out.baseline_drift = drift_n ? std::sqrt(drift_sq / drift_n) : 0.0;
  if (lc_n) out.mean_lc_baseline /= lc_n;
  if (lr_n) out.mean_lr_distance /= lr_n;
  return out;
}

inline TrajectoryMetrics evaluate_trajectory(const SparseModel& m, const synth::SyntheticTracks& truth) {
  return evaluate_trajectory(m, trajectory_truth(truth));
}

inline Json trajectory_metrics_to_json(const TrajectoryMetrics& t) {
  return Json{{"registered", t.registered},
              {"trajectory_length", t.trajectory_length},
              {"center_rmse", t.center_rmse},
              {"center_rmse_fraction", t.trajectory_length > 0.0 ? t.center_rmse / t.trajectory_length : 0.0},
              {"mean_center_error", t.mean_center_error},
              {"baseline_drift", t.baseline_drift},
              {"max_lc_baseline_error", t.max_lc_baseline_error},
              {"max_lr_distance_rel_error", t.max_lr_distance_rel_error},
              {"mean_lc_baseline", t.mean_lc_baseline},
              {"mean_lr_distance", t.mean_lr_distance}};
}

}  // namespace rigrecon::sfm
