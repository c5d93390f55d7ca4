#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rigrecon/imaging/filters.hpp"
#include "rigrecon/sfm/calibration.hpp"
#include "rigrecon/synth/board.hpp"
#include "rigrecon/synth/camera_presets.hpp"
#include "rigrecon/synth/texture.hpp"

namespace rigrecon::sfm {
namespace {

geometry::CameraModel initial_guess() {
  geometry::CameraModel m;
  m.intr = synth::rig_camera().intr;
  m.intr.fx = m.intr.fy = 500.0;
  return m;
}

// RMS of the injected noise, measured against the true projections.
double injected_rms(const synth::BoardViews& views, const geometry::CameraModel& truth) {
  double sum = 0.0;
  for (const auto& o : views.observations) {
    const Vec2 p = geometry::project(o.board, views.poses[o.frame], truth.intr, truth.dist);
    sum += (p - o.pixel).squaredNorm();
  }
  return std::sqrt(sum / views.observations.size());
}

TEST(BoardViews, CornersOnThe22mmLattice) {
  const BoardGeometry board;
  EXPECT_EQ(board.num_corners(), 52 * 36);
  const auto views = synth::generate_board_views(board, synth::rig_camera(), 6, 0.0, 3);
  ASSERT_FALSE(views.observations.empty());
  for (const auto& o : views.observations) {
    const double i = o.board.x() / 0.022, j = o.board.y() / 0.022;
    EXPECT_NEAR(i, std::round(i), 1e-9);
    EXPECT_NEAR(j, std::round(j), 1e-9);
    EXPECT_EQ(o.board.z(), 0.0);
  }
  EXPECT_NO_THROW(check_observations(views.observations, board));
}

TEST(BoardViews, PoseRangesAndDiversity) {
  const auto views = synth::generate_board_views({}, synth::rig_camera(), 40, 0.25, 5);
  ASSERT_EQ(views.poses.size(), 40u);
  Vec3 lo = Vec3::Constant(1e9), hi = Vec3::Constant(-1e9);
  const Vec3 center = BoardGeometry{}.center();
  for (const auto& pose : views.poses) {
    // R = Rz(roll) Rx(pitch) Ry(yaw); recover the angles from the matrix.
    const Vec3 e = geometry::rad2deg(1.0) * pose.rotation_matrix().eulerAngles(2, 0, 1);
    Vec3 a = e;
    if (std::abs(a.y()) > 90.0) a = Vec3(e.x() - std::copysign(180.0, e.x()), std::copysign(180.0, e.y()) - e.y(),
                                         e.z() - std::copysign(180.0, e.z()));
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(a);
    const double d = pose.apply(center).norm();
    EXPECT_GE(d, 0.30 - 1e-9);
    EXPECT_LE(d, 1.20 + 1e-9);
  }
  for (int k = 0; k < 3; ++k) EXPECT_GE(hi(k) - lo(k), 40.0) << "axis " << k;
}

TEST(BoardViews, Deterministic) {
  const auto a = synth::generate_board_views({}, synth::rig_camera(), 5, 0.5, 9);
  const auto b = synth::generate_board_views({}, synth::rig_camera(), 5, 0.5, 9);
  ASSERT_EQ(a.observations.size(), b.observations.size());
  for (std::size_t i = 0; i < a.observations.size(); ++i) EXPECT_EQ(a.observations[i].pixel, b.observations[i].pixel);
}

TEST(Calibration, JacobiansMatchCentralDifferences) {
  const auto cam = synth::rig_camera();
  const auto views = synth::generate_board_views({}, cam, 4, 0.0, 2);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto& o = views.observations[rng() % views.observations.size()];
    const Pose pose = views.poses[o.frame];
    const auto t = detail::calib_term(cam, pose, o.board, o.pixel);
    ASSERT_TRUE(t.valid);
    const auto p0 = detail::camera_params(cam);
    for (int k = 0; k < detail::kIntrParams; ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(p0[k]));
      auto pp = p0, pm = p0;
      pp[k] += h;
      pm[k] -= h;
      const Vec2 fd = (detail::calib_term(detail::with_params(cam, pp), pose, o.board, o.pixel).residual -
                       detail::calib_term(detail::with_params(cam, pm), pose, o.board, o.pixel).residual) /
                      (2 * h);
      EXPECT_LE((fd - t.J_cam.col(k)).norm(), 1e-5 * std::max(1.0, fd.norm())) << "camera parameter " << k;
    }
    for (int k = 0; k < 6; ++k) {
      const double h = 1e-7;
      auto perturb = [&](double s) {
        Pose p = pose;
        Eigen::Matrix<double, 6, 1> d = Eigen::Matrix<double, 6, 1>::Zero();
        d(k) = s;
        p.rotation = Eigen::Quaterniond(geometry::so3_exp(d.head<3>()) * p.rotation_matrix());
        p.translation += d.tail<3>();
        return detail::calib_term(cam, p, o.board, o.pixel).residual;
      };
      const Vec2 fd = (perturb(h) - perturb(-h)) / (2 * h);
      EXPECT_LE((fd - t.J_pose.col(k)).norm(), 1e-5 * std::max(1.0, fd.norm())) << "pose parameter " << k;
    }
  }
}

TEST(Calibration, HomographyPoseExactOnPinholeData) {
  geometry::CameraModel pinhole = synth::rig_camera();
  pinhole.dist = {};
  const auto views = synth::generate_board_views({}, pinhole, 4, 0.0, 8);
  std::vector<Vec2> src, dst;
  for (const auto& o : views.observations)
    if (o.frame == 0) {
      src.emplace_back(o.board.x(), o.board.y());
      dst.push_back(pinhole.intr.to_normalized(o.pixel));
    }
  const Pose p = detail::pose_from_homography(detail::fit_homography(src, dst));
  EXPECT_LT(geometry::rotation_angle(p.rotation_matrix() * views.poses[0].rotation_matrix().transpose()), 1e-8);
  EXPECT_LT((p.translation - views.poses[0].translation).norm(), 1e-9);
}

TEST(Calibration, ZeroNoiseRecoversModelExactly) {
  const auto truth = synth::rig_camera();
  const auto views = synth::generate_board_views({}, truth, 20, 0.0, 1);
  const auto res = calibrate(views.observations, initial_guess());
  EXPECT_TRUE(res.converged);
  EXPECT_LT(res.rms, 1e-6);
  const auto got = detail::camera_params(res.model), want = detail::camera_params(truth);
  for (int k = 0; k < detail::kIntrParams; ++k)
    EXPECT_LE(std::abs(got[k] - want[k]), 1e-6 * std::abs(want[k])) << "parameter " << k;
}

TEST(Calibration, NoisyCornersTrackInjectedSigma) {
  const auto truth = synth::rig_camera();
  for (const std::uint64_t seed : {11u, 12u, 13u}) {
    const auto views = synth::generate_board_views({}, truth, 40, 0.25, seed);
    const auto res = calibrate(views.observations, initial_guess());
    ASSERT_TRUE(res.converged);
    EXPECT_GE(res.rms, 0.15);
    EXPECT_LE(res.rms, 0.40);
    // Least squares can only fit below the noise it was given, and with
    // 12 + 6F parameters against ~1e5 residuals only barely.
    const double noise = injected_rms(views, truth);
    EXPECT_LE(res.rms, noise + 1e-9);
    EXPECT_GT(res.rms, 0.98 * noise);
    EXPECT_LT(std::abs(res.model.intr.fx / truth.intr.fx - 1.0), 0.005);
    EXPECT_LT(std::abs(res.model.intr.fy / truth.intr.fy - 1.0), 0.005);
    EXPECT_LT(std::abs(res.model.intr.cx - truth.intr.cx), 1.0);
    EXPECT_LT(std::abs(res.model.intr.cy - truth.intr.cy), 1.0);
    // Coefficients of the rational model trade off against each other; the
    // mapping they produce is what must agree.
    EXPECT_LT(distortion_mapping_difference(res.model, truth, 1.5), 0.5);
  }
}

TEST(Calibration, ReferenceNoiseLevel) {
  const auto views = synth::generate_board_views({}, synth::rig_camera(), 40, 0.75, 21);
  const auto res = calibrate(views.observations, initial_guess());
  EXPECT_NEAR(res.rms, 0.75, 0.15);
}

TEST(Calibration, CostMonotoneAndGradientSmall) {
  const auto views = synth::generate_board_views({}, synth::rig_camera(), 12, 0.4, 31);
  const auto res = calibrate(views.observations, initial_guess());
  ASSERT_GE(res.cost_history.size(), 2u);
  for (std::size_t i = 1; i < res.cost_history.size(); ++i) EXPECT_LE(res.cost_history[i], res.cost_history[i - 1]);
  EXPECT_TRUE(res.converged);
  EXPECT_LT(res.gradient_norm, 1e-6);
  EXPECT_LT(res.rms, res.initial_rms);
}

TEST(Calibration, NearIdenticalViewsAreRankDeficient) {
  const auto cam = synth::rig_camera();
  const BoardGeometry board;
  std::vector<CalibrationObservation> obs;
  for (int f = 0; f < 6; ++f) {
    const Pose pose = Pose::from_matrix(geometry::so3_exp(Vec3(0.0, 0.0, 0.01 * f)),
                                        Vec3(-0.5 + 0.01 * f, -0.35, 0.8));
    for (int id = 0; id < board.num_corners(); id += 7) {
      const Vec2 p = geometry::project(board.corner(id), pose, cam.intr, cam.dist);
      if (p.x() >= 0 && p.y() >= 0 && p.x() < cam.intr.width && p.y() < cam.intr.height)
        obs.push_back({id, board.corner(id), p, f});
    }
  }
  try {
    calibrate(obs, initial_guess());
    FAIL() << "expected RankDeficient";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
  }
}

TEST(Calibration, PreconditionsAndIterationBudget) {
  const auto views = synth::generate_board_views({}, synth::rig_camera(), 6, 0.25, 41);
  std::vector<CalibrationObservation> three;
  for (const auto& o : views.observations)
    if (o.frame < 3) three.push_back(o);
  EXPECT_THROW(calibrate(three, initial_guess()), Error);

  // A frame with fewer than 20 corners is left out rather than fitted.
  std::vector<CalibrationObservation> sparse = views.observations;
  sparse.push_back({0, Vec3::Zero(), Vec2(100, 100), 99});
  const auto res = calibrate(sparse, initial_guess());
  EXPECT_EQ(res.frames.size(), 6u);

  CalibrationOptions opts;
  opts.max_iterations = 2;
  try {
    calibrate(views.observations, initial_guess(), opts);
    FAIL() << "expected NotConverged";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotConverged);
  }
}

TEST(Calibration, ObservationsJsonRoundTrip) {
  const auto views = synth::generate_board_views({}, synth::rig_camera(), 4, 0.3, 2);
  const auto back = observations_from_json(observations_to_json(views.observations));
  ASSERT_EQ(back.size(), views.observations.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].corner_id, views.observations[i].corner_id);
    EXPECT_EQ(back[i].frame, views.observations[i].frame);
    EXPECT_EQ(back[i].pixel, views.observations[i].pixel);
  }
}

imaging::Image textured(std::uint64_t seed, int size = 64) {
  const synth::ValueNoise noise(seed, 4.0);
  imaging::Image img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) img.at(x, y) = noise(x, y);
  return img;
}

TEST(FrameCuration, PicksTheSharpFrame) {
  std::vector<imaging::Image> frames;
  for (int i = 0; i < 10; ++i) {
    const auto img = textured(100 + i);
    frames.push_back(i == 6 ? img : imaging::gaussian_blur(img, 2.0));
  }
  EXPECT_EQ(frame_curation(frames), std::vector<int>{6});
}

TEST(FrameCuration, AlternatingSequence) {
  std::vector<imaging::Image> frames;
  for (int i = 0; i < 30; ++i) {
    const auto img = textured(200 + i);
    frames.push_back(i % 2 == 0 ? img : imaging::gaussian_blur(img, 1.5));
  }
  const auto kept = frame_curation(frames);
  ASSERT_EQ(kept.size(), 3u);
  for (std::size_t w = 0; w < kept.size(); ++w) {
    EXPECT_EQ(kept[w] % 2, 0);
    EXPECT_GE(kept[w], static_cast<int>(10 * w));
    EXPECT_LT(kept[w], static_cast<int>(10 * w + 10));
  }
}

TEST(FrameCuration, OutputSizeIsCeilingOfWindows) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 1; n <= 47; n += 3)
    for (int w : {1, 4, 10, 13}) {
      std::vector<double> s(static_cast<std::size_t>(n));
      for (double& v : s) v = u(rng);
      const auto kept = curate_by_score(s, w);
      EXPECT_EQ(static_cast<int>(kept.size()), (n + w - 1) / w);
      for (std::size_t k = 0; k < kept.size(); ++k) {
        const int lo = static_cast<int>(k) * w, hi = std::min(n, lo + w);
        for (int i = lo; i < hi; ++i) EXPECT_GE(s[kept[k]], s[i]);
      }
    }
}

}  // namespace
}  // namespace rigrecon::sfm
