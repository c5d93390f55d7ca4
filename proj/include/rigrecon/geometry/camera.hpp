#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/json_io.hpp"
#include "rigrecon/geometry/pose.hpp"

namespace rigrecon::geometry {

/// Pinhole intrinsics. Pixel centers sit at integer coordinates with (0, 0)
/// at the center of the top-left pixel.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.5;
  double cy = 0.5;
  int width = 1;
  int height = 1;

  Mat3 matrix() const {
    Mat3 K;
    K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return K;
  }

  Vec2 to_pixel(const Vec2& normalized) const {
    return {fx * normalized.x() + cx, fy * normalized.y() + cy};
  }

  Vec2 to_normalized(const Vec2& pixel) const {
    return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy};
  }

  bool is_valid() const {
    return fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx > 0.0 && cx < width && cy > 0.0 &&
           cy < height;
  }

  void validate() const {
    require(is_valid(), ErrorCode::InvalidArgument, "camera intrinsics violate fx,fy > 0, 0 < c < size");
  }

  /// Same field of view at a different resolution.
  CameraIntrinsics scaled(double factor) const {
    CameraIntrinsics k = *this;
    k.fx *= factor;
    k.fy *= factor;
    k.cx = (cx + 0.5) * factor - 0.5;
    k.cy = (cy + 0.5) * factor - 0.5;
    k.width = static_cast<int>(std::lround(width * factor));
    k.height = static_cast<int>(std::lround(height * factor));
    return k;
  }
};

/// Rational radial (k1..k6) plus tangential (p1, p2) distortion.
struct DistortionCoeffs {
  double k1 = 0, k2 = 0, k3 = 0, k4 = 0, k5 = 0, k6 = 0, p1 = 0, p2 = 0;

  std::array<double, 8> as_array() const { return {k1, k2, k3, k4, k5, k6, p1, p2}; }

  static DistortionCoeffs from_array(const std::array<double, 8>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7]};
  }

  bool is_zero() const {
    for (double v : as_array())
      if (v != 0.0) return false;
    return true;
  }
};

/// Eight-coefficient distortion applied to normalized coordinates. Templated so
/// calibration can push autodiff scalars through the same code path.
template <typename T>
void distort_point(const T* coeffs, const T& x, const T& y, T& xd, T& yd) {
  const T& k1 = coeffs[0];
  const T& k2 = coeffs[1];
  const T& k3 = coeffs[2];
  const T& k4 = coeffs[3];
  const T& k5 = coeffs[4];
  const T& k6 = coeffs[5];
  const T& p1 = coeffs[6];
  const T& p2 = coeffs[7];
  const T r2 = x * x + y * y;
  const T r4 = r2 * r2;
  const T r6 = r4 * r2;
  const T radial = (T(1) + k1 * r2 + k2 * r4 + k3 * r6) / (T(1) + k4 * r2 + k5 * r4 + k6 * r6);
  const T xy = x * y;
  xd = x * radial + T(2) * p1 * xy + p2 * (r2 + T(2) * x * x);
  yd = y * radial + p1 * (r2 + T(2) * y * y) + T(2) * p2 * xy;
}

inline Vec2 distort(const Vec2& p, const DistortionCoeffs& dist) {
  const auto c = dist.as_array();
  Vec2 out;
  distort_point(c.data(), p.x(), p.y(), out.x(), out.y());
  return out;
}

/// d distort / d p, evaluated analytically.
inline Mat2 distort_jacobian(const Vec2& p, const DistortionCoeffs& d) {
  const double x = p.x(), y = p.y();
  const double r2 = x * x + y * y;
  const double num = 1 + d.k1 * r2 + d.k2 * r2 * r2 + d.k3 * r2 * r2 * r2;
  const double den = 1 + d.k4 * r2 + d.k5 * r2 * r2 + d.k6 * r2 * r2 * r2;
  const double dnum = d.k1 + 2 * d.k2 * r2 + 3 * d.k3 * r2 * r2;
  const double dden = d.k4 + 2 * d.k5 * r2 + 3 * d.k6 * r2 * r2;
  const double radial = num / den;
  const double dradial = (dnum * den - num * dden) / (den * den);  // d radial / d r2
  Mat2 J;
  J(0, 0) = radial + x * dradial * 2 * x + 2 * d.p1 * y + d.p2 * (2 * x + 4 * x);
  J(0, 1) = x * dradial * 2 * y + 2 * d.p1 * x + d.p2 * 2 * y;
  J(1, 0) = y * dradial * 2 * x + d.p1 * 2 * x + 2 * d.p2 * y;
  J(1, 1) = radial + y * dradial * 2 * y + d.p1 * (2 * y + 4 * y) + 2 * d.p2 * x;
  return J;
}

/// Largest normalized radius inside a 160 degree field of view.
inline const double kMaxFieldRadius = std::tan(deg2rad(80.0));
inline constexpr int kRadialSamples = 4096;

inline double radial_denominator(const DistortionCoeffs& d, double r2) {
  return 1 + d.k4 * r2 + d.k5 * r2 * r2 + d.k6 * r2 * r2 * r2;
}

/// Distorted radius of the radial profile (tangential terms ignored).
inline double radial_profile(const DistortionCoeffs& d, double r) {
  const double r2 = r * r;
  return r * (1 + d.k1 * r2 + d.k2 * r2 * r2 + d.k3 * r2 * r2 * r2) / radial_denominator(d, r2);
}

inline double radial_profile_slope(const DistortionCoeffs& d, double r) {
  const double r2 = r * r;
  const double num = 1 + d.k1 * r2 + d.k2 * r2 * r2 + d.k3 * r2 * r2 * r2;
  const double den = radial_denominator(d, r2);
  const double dnum = d.k1 + 2 * d.k2 * r2 + 3 * d.k3 * r2 * r2;
  const double dden = d.k4 + 2 * d.k5 * r2 + 3 * d.k6 * r2 * r2;
  return num / den + 2 * r2 * (dnum * den - num * dden) / (den * den);
}

/// True when the rational denominator stays positive on a radial grid up to r_limit.
inline bool denominator_positive(const DistortionCoeffs& d, double r_limit = kMaxFieldRadius) {
  for (int i = 0; i <= kRadialSamples; ++i) {
    const double r = r_limit * i / kRadialSamples;
    if (!(radial_denominator(d, r * r) > 0.0)) return false;
  }
  return true;
}

/// Region on which distortion is a bijection along the radial profile.
struct InvertibleRegion {
  double r_max = 0.0;   // undistorted radius
  double rd_max = 0.0;  // matching distorted radius
};

inline InvertibleRegion invertible_region(const DistortionCoeffs& d) {
  InvertibleRegion region;
  for (int i = 1; i <= kRadialSamples; ++i) {
    const double r = kMaxFieldRadius * i / kRadialSamples;
    if (!(radial_denominator(d, r * r) > 0.0) || !(radial_profile_slope(d, r) > 0.0)) break;
    region.r_max = r;
  }
  if (region.r_max <= 0.0) return region;
  // Tangential terms bend the image of the r_max circle; accept only the disk
  // that circle's image fully encloses.
  region.rd_max = radial_profile(d, region.r_max);
  for (int i = 0; i < 720; ++i) {
    const double a = 2.0 * kPi * i / 720.0;
    region.rd_max = std::min(region.rd_max, distort(region.r_max * Vec2(std::cos(a), std::sin(a)), d).norm());
  }
  return region;
}

/// Inverts `distort` by damped Newton iteration. Construct once per
/// coefficient set; the invertible region is computed up front.
class Undistorter {
 public:
  static constexpr int kMaxIterations = 50;
  static constexpr double kStepTolerance = 1e-10;

  explicit Undistorter(const DistortionCoeffs& dist)
      : dist_(dist), identity_(dist.is_zero()), region_(invertible_region(dist)) {}

  const InvertibleRegion& region() const { return region_; }
  const DistortionCoeffs& coeffs() const { return dist_; }

  bool in_region(const Vec2& p_dist) const { return identity_ || p_dist.norm() <= region_.rd_max; }

  Vec2 operator()(const Vec2& p_dist) const {
    if (identity_) return p_dist;
    if (p_dist.x() == 0.0 && p_dist.y() == 0.0) return p_dist;
    if (!in_region(p_dist))
      fail(ErrorCode::OutsideInvertibleRegion,
           "distorted radius " + std::to_string(p_dist.norm()) + " exceeds " + std::to_string(region_.rd_max));
    Vec2 q = p_dist;
    Vec2 residual = distort(q, dist_) - p_dist;
    for (int it = 0; it < kMaxIterations; ++it) {
      const Mat2 J = distort_jacobian(q, dist_);
      Vec2 step = J.partialPivLu().solve(-residual);
      if (!step.allFinite()) break;
      // Halve the step until the residual stops growing.
      double scale = 1.0;
      Vec2 candidate = q + step;
      Vec2 cand_res = distort(candidate, dist_) - p_dist;
      for (int h = 0; h < 30 && !(cand_res.norm() <= residual.norm()); ++h) {
        scale *= 0.5;
        candidate = q + scale * step;
        cand_res = distort(candidate, dist_) - p_dist;
      }
      q = candidate;
      residual = cand_res;
      if ((scale * step).norm() < kStepTolerance || residual.norm() == 0.0) return q;
    }
    if (residual.norm() < 1e-12) return q;
    fail(ErrorCode::NoConvergence, "undistort did not converge, residual " + std::to_string(residual.norm()));
  }

 private:
  DistortionCoeffs dist_;
  bool identity_;
  InvertibleRegion region_;
};

inline Vec2 undistort(const Vec2& p_dist, const DistortionCoeffs& dist) { return Undistorter(dist)(p_dist); }

inline constexpr double kMinDepth = 1e-9;

/// World point to pixel through pose, distortion and K.
inline Vec2 project(const Vec3& P, const Pose& pose, const CameraIntrinsics& intr, const DistortionCoeffs& dist) {
  const Vec3 Xc = pose.apply(P);
  if (!(Xc.z() > kMinDepth)) fail(ErrorCode::PointBehindCamera, "camera-frame depth " + std::to_string(Xc.z()));
  const Vec2 p_norm(Xc.x() / Xc.z(), Xc.y() / Xc.z());
  return intr.to_pixel(distort(p_norm, dist));
}

/// Intrinsics plus distortion, the unit that gets serialized.
struct CameraModel {
  CameraIntrinsics intr;
  DistortionCoeffs dist;
};

inline Json camera_model_to_json(const CameraModel& m) {
  Json j;
  j["model"] = "rational8";
  j["width"] = m.intr.width;
  j["height"] = m.intr.height;
  j["fx"] = m.intr.fx;
  j["fy"] = m.intr.fy;
  j["cx"] = m.intr.cx;
  j["cy"] = m.intr.cy;
  const auto c = m.dist.as_array();
  static constexpr const char* kNames[8] = {"k1", "k2", "k3", "k4", "k5", "k6", "p1", "p2"};
  for (int i = 0; i < 8; ++i) j[kNames[i]] = c[i];
  return j;
}

inline CameraModel camera_model_from_json(const Json& j) {
  require(json_get<std::string>(j, "model") == "rational8", ErrorCode::ParseError, "unsupported camera model");
  CameraModel m;
  m.intr.width = json_get<int>(j, "width");
  m.intr.height = json_get<int>(j, "height");
  m.intr.fx = json_get<double>(j, "fx");
  m.intr.fy = json_get<double>(j, "fy");
  m.intr.cx = json_get<double>(j, "cx");
  m.intr.cy = json_get<double>(j, "cy");
  static constexpr const char* kNames[8] = {"k1", "k2", "k3", "k4", "k5", "k6", "p1", "p2"};
  std::array<double, 8> c{};
  for (int i = 0; i < 8; ++i) c[i] = json_get<double>(j, kNames[i]);
  m.dist = DistortionCoeffs::from_array(c);
  m.intr.validate();
  return m;
}

inline Json pose_to_json(const Pose& p) {
  const auto& q = p.rotation;
  return Json{{"quaternion", {q.w(), q.x(), q.y(), q.z()}},
              {"translation", {p.translation.x(), p.translation.y(), p.translation.z()}}};
}

inline Pose pose_from_json(const Json& j) {
  const auto q = json_get<std::vector<double>>(j, "quaternion");
  const auto t = json_get<std::vector<double>>(j, "translation");
  require(q.size() == 4 && t.size() == 3, ErrorCode::ParseError, "pose needs 4 quaternion and 3 translation values");
  Pose p;
  p.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]).normalized();
  p.translation = Vec3(t[0], t[1], t[2]);
  return p;
}

}  // namespace rigrecon::geometry
