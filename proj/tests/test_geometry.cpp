#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rigrecon/geometry/camera.hpp"
#include "rigrecon/geometry/pose.hpp"
#include "rigrecon/geometry/undistort_image.hpp"
#include "rigrecon/synth/camera_presets.hpp"
#include "test_support.hpp"

namespace rigrecon::geometry {
namespace {

CameraIntrinsics make_intrinsics() {
  CameraIntrinsics k;
  k.fx = k.fy = 500.0;
  k.cx = 960.0;
  k.cy = 540.0;
  k.width = 1920;
  k.height = 1080;
  return k;
}

TEST(Project, OpticalAxisHitsPrincipalPoint) {
  const Vec2 p = project(Vec3(0, 0, 1), Pose::identity(), make_intrinsics(), DistortionCoeffs{});
  EXPECT_DOUBLE_EQ(p.x(), 960.0);
  EXPECT_DOUBLE_EQ(p.y(), 540.0);
}

TEST(Project, RadialK1HandValue) {
  DistortionCoeffs d;
  d.k1 = 0.1;
  // x' = 0.1, r^2 = 0.01, x_d = 0.1 * 1.001 = 0.1001, u = 960 + 500 * 0.1001.
  const Vec2 p = project(Vec3(0.1, 0, 1), Pose::identity(), make_intrinsics(), d);
  EXPECT_NEAR(p.x(), 1010.05, 1e-9);
  EXPECT_NEAR(p.y(), 540.0, 1e-12);
}

TEST(Project, ZeroDistortionIsPinhole) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto K = make_intrinsics();
  for (int i = 0; i < 200; ++i) {
    const Vec3 P(u(rng), u(rng), 0.5 + std::abs(u(rng)) * 3);
    const Vec2 p = project(P, Pose::identity(), K, DistortionCoeffs{});
    EXPECT_NEAR(p.x(), K.fx * P.x() / P.z() + K.cx, 1e-10);
    EXPECT_NEAR(p.y(), K.fy * P.y() / P.z() + K.cy, 1e-10);
  }
}

TEST(Project, BehindCameraThrows) {
  try {
    project(Vec3(0, 0, -1), Pose::identity(), make_intrinsics(), DistortionCoeffs{});
    FAIL() << "expected PointBehindCamera";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::PointBehindCamera);
  }
  EXPECT_THROW(project(Vec3(0, 0, 0), Pose::identity(), make_intrinsics(), DistortionCoeffs{}), Error);
}

TEST(Project, FiniteAcrossWideField) {
  // Normalized radius up to tan(80 deg) stays finite for the reference lens.
  const auto model = synth::rig_camera();
  ASSERT_TRUE(denominator_positive(model.dist));
  for (int i = 0; i <= 100; ++i) {
    const double r = kMaxFieldRadius * i / 100.0;
    const Vec2 p = project(Vec3(r, 0.3 * r, 1.0), Pose::identity(), model.intr, model.dist);
    EXPECT_TRUE(p.allFinite());
  }
}

TEST(Distort, IdentityAndFixedPoint) {
  EXPECT_EQ(distort(Vec2(0.3, -0.2), DistortionCoeffs{}), Vec2(0.3, -0.2));
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(distort(Vec2(0, 0), testing::random_distortion(rng)), Vec2(0, 0));
}

TEST(Distort, TangentialHandValue) {
  DistortionCoeffs d;
  d.p1 = 0.01;
  const Vec2 out = distort(Vec2(0.2, 0.1), d);
  EXPECT_NEAR(out.x(), 0.2004, 1e-15);
  EXPECT_NEAR(out.y(), 0.1007, 1e-15);
}

TEST(Distort, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = testing::random_distortion(rng);
    const Vec2 p(u(rng), u(rng));
    const Mat2 J = distort_jacobian(p, d);
    const double h = 1e-6;
    for (int k = 0; k < 2; ++k) {
      Vec2 e = Vec2::Zero();
      e[k] = h;
      const Vec2 fd = (distort(p + e, d) - distort(p - e, d)) / (2 * h);
      EXPECT_NEAR((J.col(k) - fd).norm(), 0.0, 1e-6 * (1 + fd.norm()));
    }
  }
}

TEST(Undistort, ZeroCoefficientsAndCenter) {
  EXPECT_EQ(undistort(Vec2(0.7, -0.1), DistortionCoeffs{}), Vec2(0.7, -0.1));
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(undistort(Vec2(0, 0), testing::random_distortion(rng)), Vec2(0, 0));
}

TEST(Undistort, InvertsReferenceLens) {
  const auto d = synth::wide_angle_distortion();
  const Vec2 p(0.4, 0.3);
  const Vec2 back = undistort(distort(p, d), d);
  EXPECT_NEAR((back - p).norm(), 0.0, 1e-8);
}

TEST(Undistort, RoundTripProperty) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int set = 0; set < 10; ++set) {
    const auto d = testing::random_distortion(rng);
    const Undistorter inv(d);
    ASSERT_GT(inv.region().r_max, 0.0);
    for (int i = 0; i < 200; ++i) {
      const double r = inv.region().rd_max * std::sqrt(u(rng));
      const double a = 2 * kPi * u(rng);
      const Vec2 p(r * std::cos(a), r * std::sin(a));
      EXPECT_LT((distort(inv(p), d) - p).norm(), 1e-8);
    }
  }
}

TEST(Undistort, RejectsPointsBeyondFold) {
  DistortionCoeffs d;
  d.k1 = -0.4;  // r(1 - 0.4 r^2) turns over at r = sqrt(1/1.2)
  const Undistorter inv(d);
  EXPECT_NEAR(inv.region().r_max, std::sqrt(1.0 / 1.2), 2e-3);
  try {
    inv(Vec2(inv.region().rd_max * 1.01, 0.0));
    FAIL() << "expected OutsideInvertibleRegion";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::OutsideInvertibleRegion);
  }
}

TEST(PoseOps, GroupLaws) {
  EXPECT_TRUE(invert(Pose::identity()).rotation.isApprox(Eigen::Quaterniond::Identity()));
  EXPECT_EQ(invert(Pose::identity()).translation, Vec3::Zero());
  const Vec3 P(1.5, -2.0, 0.25);
  EXPECT_EQ(apply(Pose::identity(), P), P);

  Pose a, b;
  a.translation = Vec3(1, 0, 0);
  b.translation = Vec3(0, 1, 0);
  EXPECT_TRUE(apply(compose(b, a), Vec3::Zero()).isApprox(Vec3(1, 1, 0)));

  std::mt19937_64 rng(17);
  std::normal_distribution<double> n(0.0, 1.0);
  auto random_pose = [&] {
    Pose p;
    p.rotation = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized();
    p.translation = Vec3(n(rng), n(rng), n(rng));
    return p;
  };
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(), q = random_pose(), r = random_pose();
    const Pose id = compose(p, invert(p));
    EXPECT_LT(id.translation.norm(), 1e-9);
    EXPECT_LT(rotation_angle(id.rotation_matrix()), 1e-9);
    const Pose left = compose(compose(p, q), r);
    const Pose right = compose(p, compose(q, r));
    EXPECT_LT((left.translation - right.translation).norm(), 1e-9);
    EXPECT_LT(left.rotation.angularDistance(right.rotation), 1e-9);
    EXPECT_NEAR(left.rotation.norm(), 1.0, 1e-12);
    EXPECT_LT((p.apply(p.center())).norm(), 1e-9);
  }
}

TEST(Rotation, LogExpAndJacobian) {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> n(0.0, 0.8);
  for (int i = 0; i < 50; ++i) {
    const Vec3 w(n(rng), n(rng), n(rng));
    EXPECT_LT((so3_log(so3_exp(w)) - w).norm(), 1e-9);
    const Vec3 d(1e-6, -2e-6, 0.5e-6);
    const Vec3 lhs = so3_log(so3_exp(d) * so3_exp(w));
    const Vec3 rhs = w + so3_left_jacobian_inverse(w) * d;
    EXPECT_LT((lhs - rhs).norm(), 1e-10);
  }
}

TEST(CameraModelJson, RoundTripsAllFields) {
  const auto m = synth::rig_camera();
  const Json j = camera_model_to_json(m);
  for (const char* key : {"model", "width", "height", "fx", "fy", "cx", "cy", "k1", "k2", "k3", "k4", "k5", "k6",
                          "p1", "p2"})
    EXPECT_TRUE(j.contains(key)) << key;
  const auto back = camera_model_from_json(Json::parse(j.dump()));
  EXPECT_EQ(back.dist.as_array(), m.dist.as_array());
  EXPECT_EQ(back.intr.fx, m.intr.fx);
  EXPECT_EQ(back.intr.width, m.intr.width);
  Json bad = j;
  bad["model"] = "fisheye";
  EXPECT_THROW(camera_model_from_json(bad), Error);
}

// --- undistort_image -------------------------------------------------------

CameraIntrinsics small_camera() {
  CameraIntrinsics k;
  k.width = 320;
  k.height = 240;
  k.fx = k.fy = 170.0;
  k.cx = 159.5;
  k.cy = 119.5;
  return k;
}

// Renders a distorted view of an ideal pinhole pattern: each distorted pixel
// is supersampled, pulled back through the inverse model, and the pattern is
// evaluated at the ideal pinhole position.
template <typename Pattern>
imaging::Image render_distorted(const CameraIntrinsics& K, const DistortionCoeffs& d, Pattern pattern, int ss) {
  const Undistorter inv(d);
  imaging::Image img(K.width, K.height, 1);
  for (int y = 0; y < K.height; ++y)
    for (int x = 0; x < K.width; ++x) {
      double acc = 0.0;
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx) {
          const Vec2 px(x - 0.5 + (sx + 0.5) / ss, y - 0.5 + (sy + 0.5) / ss);
          const Vec2 ideal = K.to_pixel(inv(K.to_normalized(px)));
          acc += pattern(ideal);
        }
      img.at(x, y) = acc / (ss * ss);
    }
  return img;
}

TEST(UndistortImage, ZeroCoefficientsIsIdentity) {
  std::mt19937_64 rng(23);
  const auto K = small_camera();
  const auto img = testing::smooth_texture(K.width, K.height, 6.0, rng);
  const auto out = undistort_image(img, K, DistortionCoeffs{}, K);
  for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(out.data[i], img.data[i], 1e-12);
}

TEST(UndistortImage, StraightLinesComeOutStraight) {
  const auto K = small_camera();
  const auto d = synth::wide_angle_distortion();
  const std::vector<double> rows = {40.0, 80.0, 119.5, 160.0, 200.0};
  const double sigma = 1.5;
  auto pattern = [&](const Vec2& p) {
    double v = 0.0;
    for (double r : rows) v += std::exp(-0.5 * (p.y() - r) * (p.y() - r) / (sigma * sigma));
    return std::min(1.0, v);
  };
  const auto distorted = render_distorted(K, d, pattern, 3);
  const auto rect = undistort_image(distorted, K, d, K);

  // Measure each line by an intensity centroid per column, fit y = a + b x and
  // report the worst deviation.
  for (double r : rows) {
    std::vector<double> xs, ys;
    for (int x = 20; x < K.width - 20; ++x) {
      double sw = 0.0, sy = 0.0;
      for (int y = static_cast<int>(r) - 6; y <= static_cast<int>(r) + 6; ++y) {
        const double w = rect.at(x, y);
        sw += w;
        sy += w * y;
      }
      if (sw > 1.0) {
        xs.push_back(x);
        ys.push_back(sy / sw);
      }
    }
    ASSERT_GT(xs.size(), 200u);
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i] / n, my += ys[i] / n;
    for (std::size_t i = 0; i < xs.size(); ++i) sxx += (xs[i] - mx) * (xs[i] - mx), sxy += (xs[i] - mx) * (ys[i] - my);
    const double b = sxy / sxx, a = my - b * mx;
    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) worst = std::max(worst, std::abs(ys[i] - (a + b * xs[i])));
    EXPECT_LT(worst, 0.5) << "line at row " << r;
  }
}

// Gradient-orthogonality corner refinement: the corner q minimizes
// sum_i (g_i . (q - p_i))^2 over a window.
Vec2 refine_corner(const imaging::Image& img, Vec2 q, int half) {
  for (int it = 0; it < 20; ++it) {
    Mat2 A = Mat2::Zero();
    Vec2 b = Vec2::Zero();
    const int cx = static_cast<int>(std::lround(q.x())), cy = static_cast<int>(std::lround(q.y()));
    for (int y = cy - half; y <= cy + half; ++y)
      for (int x = cx - half; x <= cx + half; ++x) {
        const Vec2 g(0.5 * (img.at(x + 1, y) - img.at(x - 1, y)), 0.5 * (img.at(x, y + 1) - img.at(x, y - 1)));
        const Mat2 G = g * g.transpose();
        A += G;
        b += G * Vec2(x, y);
      }
    const Vec2 next = A.ldlt().solve(b);
    if ((next - q).norm() < 1e-4) return next;
    q = next;
  }
  return q;
}

TEST(UndistortImage, CheckerboardCornersMatchPinhole) {
  const auto K = small_camera();
  const auto d = synth::wide_angle_distortion();
  const double square = 20.0;
  const Vec2 origin(9.5, 9.5);
  auto pattern = [&](const Vec2& p) {
    const long i = static_cast<long>(std::floor((p.x() - origin.x()) / square));
    const long j = static_cast<long>(std::floor((p.y() - origin.y()) / square));
    return ((i + j) & 1) ? 0.9 : 0.1;
  };
  const auto distorted = render_distorted(K, d, pattern, 4);
  const auto rect = undistort_image(distorted, K, d, K);
  double worst = 0.0;
  int checked = 0;
  for (int j = 1; j <= 10; ++j)
    for (int i = 1; i <= 14; ++i) {
      const Vec2 truth = origin + square * Vec2(i, j);
      if (truth.x() < 30 || truth.y() < 30 || truth.x() > K.width - 30 || truth.y() > K.height - 30) continue;
      const Vec2 found = refine_corner(rect, truth + Vec2(1.2, -0.8), 5);
      worst = std::max(worst, (found - truth).norm());
      ++checked;
    }
  EXPECT_GT(checked, 80);
  EXPECT_LT(worst, 0.3);
}

}  // namespace
}  // namespace rigrecon::geometry
