#pragma once

#include <cmath>

#include "rigrecon/core/error.hpp"
#include "rigrecon/geometry/rotation.hpp"

namespace rigrecon::geometry {

/// Rigid world-to-camera transform: x_cam = R * x_world + t.
/// The rotation is kept as a unit quaternion and exposed as a matrix when
/// Jacobians need it.
struct Pose {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }

  static Pose from_matrix(const Mat3& R, const Vec3& t) {
    Pose p;
    p.rotation = Eigen::Quaterniond(R).normalized();
    p.translation = t;
    return p;
  }

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }

  Vec3 apply(const Vec3& X) const { return rotation * X + translation; }

  /// Camera center in world coordinates.
  Vec3 center() const { return -(rotation.conjugate() * translation); }

  Pose inverse() const {
    Pose p;
    p.rotation = rotation.conjugate();
    p.translation = -(p.rotation * translation);
    return p;
  }

  void renormalize() { rotation.normalize(); }

  bool is_valid(double tol = 1e-9) const {
    return std::abs(rotation.norm() - 1.0) <= tol && translation.allFinite() &&
           rotation.coeffs().allFinite();
  }
};

/// compose(a, b).apply(X) == a.apply(b.apply(X)).
inline Pose compose(const Pose& a, const Pose& b) {
  Pose p;
  p.rotation = (a.rotation * b.rotation).normalized();
  p.translation = a.rotation * b.translation + a.translation;
  return p;
}

inline Pose invert(const Pose& p) { return p.inverse(); }

inline Vec3 apply(const Pose& p, const Vec3& X) { return p.apply(X); }

/// Pose of a camera whose center is `center` and whose world-to-camera rotation is R.
inline Pose pose_from_center(const Mat3& R, const Vec3& center) {
  return Pose::from_matrix(R, -R * center);
}

}  // namespace rigrecon::geometry
