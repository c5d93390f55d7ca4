#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "rigrecon/core/random.hpp"
#include "rigrecon/sfm/model.hpp"
#include "rigrecon/splat/optimize.hpp"
#include "rigrecon/synth/texture.hpp"

namespace rigrecon::synth {

struct SplatSceneOptions {
  int grid = 40;              // grid x grid Gaussians
  double extent = 0.30;       // meters, side of the covered patch
  double height = 0.40;       // mean distance above the cameras
  double relief = 0.02;       // amplitude of the surface undulation
  int views = 20;
  int heldout_views = 1;
  int image_size = 64;
  double focal = 64.0;        // pixels
  double camera_spread = 0.06;  // camera centers within +- this in x and y
  double alpha = 0.9;
  double splat_scale = 0.6;  // in-plane standard deviation over grid spacing
};

/// Ground-truth cloud of flat, textured Gaussians on an undulating sheet
/// above a set of upward-looking cameras, plus the rendered views.
struct SplatScene {
  splat::GaussianCloud truth;
  std::vector<splat::View> train;
  std::vector<splat::View> heldout;
};

inline SplatScene make_splat_scene(const SplatSceneOptions& o, std::uint64_t seed) {
  using geometry::Vec3;
  SplatScene s;
  const ValueNoise r(derive_seed(seed, {1}), 0.04), g(derive_seed(seed, {2}), 0.04), b(derive_seed(seed, {3}), 0.04);
  const double step = o.extent / (o.grid - 1);
  auto surface = [&](double x, double y) { return o.height + o.relief * std::sin(9.0 * x) * std::cos(7.0 * y); };
  for (int i = 0; i < o.grid; ++i)
    for (int j = 0; j < o.grid; ++j) {
      splat::Gaussian G;
      const double x = -0.5 * o.extent + i * step, y = -0.5 * o.extent + j * step;
      G.mu = Vec3(x, y, surface(x, y));
      const Vec3 n = Vec3(-o.relief * 9.0 * std::cos(9.0 * x) * std::cos(7.0 * y),
                          o.relief * 7.0 * std::sin(9.0 * x) * std::sin(7.0 * y), 1.0)
                         .normalized();
      G.rotation = Eigen::Quaterniond::FromTwoVectors(Vec3::UnitZ(), n);
      G.scale = Vec3(o.splat_scale * step, o.splat_scale * step, 0.1 * step);
      G.color = Vec3(r(x, y), g(x, y), b(x, y));
      G.alpha = o.alpha;
      s.truth.gaussians.push_back(G);
    }

  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> u(-o.camera_spread, o.camera_spread), tilt(-0.15, 0.15);
  geometry::CameraIntrinsics K;
  K.width = K.height = o.image_size;
  K.fx = K.fy = o.focal;
  K.cx = K.cy = 0.5 * (o.image_size - 1);
  for (int v = 0; v < o.views + o.heldout_views; ++v) {
    const Vec3 center(u(rng), u(rng), 0.0);
    const geometry::Mat3 R = geometry::so3_exp(Vec3(tilt(rng), tilt(rng), 2.0 * tilt(rng)));
    splat::View view;
    view.camera.pose = geometry::pose_from_center(R, center);
    view.camera.intr = K;
    view.image = splat::render(s.truth, view.camera).color;
    (v < o.views ? s.train : s.heldout).push_back(std::move(view));
  }
  return s;
}

/// Sparse model whose points are the truth means displaced by Gaussian
/// noise (per-axis sigma `position_noise`), colored with the truth colors.
inline sfm::SparseModel splat_seed_model(const SplatScene& s, double position_noise, std::uint64_t seed) {
  sfm::SparseModel m;
  std::mt19937_64 rng(splitmix64(seed ^ 0xABCDull));
  std::normal_distribution<double> n(0.0, position_noise);
  for (const auto& g : s.truth.gaussians) {
    sfm::ModelPoint p;
    p.xyz = g.mu + (position_noise > 0.0 ? geometry::Vec3(n(rng), n(rng), n(rng)) : geometry::Vec3::Zero());
    p.rgb = g.color;
    m.points.push_back(p);
  }
  return m;
}

}  // namespace rigrecon::synth
