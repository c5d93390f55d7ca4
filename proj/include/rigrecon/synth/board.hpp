#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/random.hpp"
#include "rigrecon/sfm/calibration.hpp"

namespace rigrecon::synth {

/// Sampling ranges for board poses, angles in degrees.
struct BoardViewRanges {
  double distance_min = 0.30;
  double distance_max = 1.20;
  double roll_max = 45.0;   // about the optical axis
  double pitch_max = 35.0;  // about the camera x axis
  double yaw_max = 35.0;    // about the camera y axis
  double center_spread = 0.4;  // board center direction within this normalized radius
};

struct BoardViews {
  std::vector<sfm::CalibrationObservation> observations;
  std::vector<geometry::Pose> poses;  // board-to-camera, one per view
  std::vector<geometry::Vec3> angles_deg;  // (roll, pitch, yaw) with R = Rz(roll) Rx(pitch) Ry(yaw)
};

/// Board views with stratified roll/pitch/yaw and uniform distance. Corners
/// are projected through the full distortion model; corners behind the
/// camera, beyond the 160 degree field or off the sensor are dropped. Noise
/// is Gaussian with 2D RMS `sigma` (sigma / sqrt(2) per axis).
inline BoardViews generate_board_views(const sfm::BoardGeometry& board, const geometry::CameraModel& model, int n_views,
                                       double sigma, std::uint64_t seed, const BoardViewRanges& ranges = {}) {
  require(n_views >= 4, ErrorCode::InvalidArgument, "board view generation needs 4 or more views");
  using geometry::Vec3;
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  // One shuffled stratum per view and axis keeps every axis spread out.
  auto strata = [&](double half_range) {
    std::vector<double> v(static_cast<std::size_t>(n_views));
    for (int i = 0; i < n_views; ++i) v[i] = -half_range + 2.0 * half_range * (i + u01(rng)) / n_views;
    std::shuffle(v.begin(), v.end(), rng);
    return v;
  };
  const auto roll = strata(ranges.roll_max), pitch = strata(ranges.pitch_max), yaw = strata(ranges.yaw_max);

  BoardViews out;
  const double axis_sigma = sigma / std::sqrt(2.0);
  for (int v = 0; v < n_views; ++v) {
    std::mt19937_64 view_rng(derive_seed(seed, {static_cast<std::uint64_t>(v)}));
    std::normal_distribution<double> noise(0.0, axis_sigma);
    std::uniform_real_distribution<double> uv(-1.0, 1.0);
    const geometry::Mat3 R = (Eigen::AngleAxisd(geometry::deg2rad(roll[v]), Vec3::UnitZ()) *
                              Eigen::AngleAxisd(geometry::deg2rad(pitch[v]), Vec3::UnitX()) *
                              Eigen::AngleAxisd(geometry::deg2rad(yaw[v]), Vec3::UnitY()))
                                 .toRotationMatrix();
    const double d = ranges.distance_min + (ranges.distance_max - ranges.distance_min) * u01(view_rng);
    const Vec3 dir = Vec3(ranges.center_spread * uv(view_rng), ranges.center_spread * uv(view_rng), 1.0).normalized();
    const geometry::Pose pose = geometry::Pose::from_matrix(R, d * dir - R * board.center());
    out.poses.push_back(pose);
    out.angles_deg.emplace_back(roll[v], pitch[v], yaw[v]);

    for (int id = 0; id < board.num_corners(); ++id) {
      const Vec3 X = board.corner(id);
      const Vec3 Xc = pose.apply(X);
      if (!(Xc.z() > 1e-3)) continue;
      const geometry::Vec2 xn(Xc.x() / Xc.z(), Xc.y() / Xc.z());
      if (xn.norm() > geometry::kMaxFieldRadius) continue;
      geometry::Vec2 p = model.intr.to_pixel(geometry::distort(xn, model.dist));
      p += geometry::Vec2(noise(view_rng), noise(view_rng));
      if (p.x() < 0.0 || p.y() < 0.0 || p.x() > model.intr.width - 1.0 || p.y() > model.intr.height - 1.0) continue;
      out.observations.push_back({id, X, p, v});
    }
  }
  return out;
}

}  // namespace rigrecon::synth
