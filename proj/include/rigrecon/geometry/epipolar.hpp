#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "rigrecon/geometry/camera.hpp"
#include "rigrecon/geometry/pose.hpp"

namespace rigrecon::geometry {

using Mat34 = Eigen::Matrix<double, 3, 4>;

/// Closest essential matrix in Frobenius norm: singular values (s, s, 0).
inline Mat3 project_to_essential(const Mat3& E) {
  Eigen::JacobiSVD<Mat3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  const double m = 0.5 * (s(0) + s(1));
  return svd.matrixU() * Vec3(m, m, 0.0).asDiagonal() * svd.matrixV().transpose();
}

/// Normalized 8-point estimate of E with x2^T E x1 = 0 from normalized image
/// coordinates. `idx` selects the correspondences used (>= 8).
inline Mat3 essential_eight_point(const std::vector<Vec2>& x1, const std::vector<Vec2>& x2,
                                  const std::vector<int>& idx) {
  const std::size_t n = idx.size();
  require(n >= 8, ErrorCode::TooFewMatches, "8-point estimate needs 8 correspondences");

  // Isotropic conditioning: zero mean, mean distance sqrt(2).
  auto conditioner = [&](const std::vector<Vec2>& x) {
    Vec2 mean = Vec2::Zero();
    for (int i : idx) mean += x[i];
    mean /= static_cast<double>(n);
    double dist = 0.0;
    for (int i : idx) dist += (x[i] - mean).norm();
    dist /= static_cast<double>(n);
    const double s = dist > 0.0 ? std::sqrt(2.0) / dist : 1.0;
    Mat3 T;
    T << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
    return T;
  };
  const Mat3 T1 = conditioner(x1), T2 = conditioner(x2);

  Eigen::Matrix<double, Eigen::Dynamic, 9> A(static_cast<Eigen::Index>(n), 9);
  for (std::size_t r = 0; r < n; ++r) {
    const Vec3 a = T1 * x1[idx[r]].homogeneous();
    const Vec3 b = T2 * x2[idx[r]].homogeneous();
    A.row(static_cast<Eigen::Index>(r)) << b.x() * a.x(), b.x() * a.y(), b.x(), b.y() * a.x(), b.y() * a.y(), b.y(),
        a.x(), a.y(), 1.0;
  }
  Eigen::Matrix<double, 9, 9> AtA = A.transpose() * A;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(AtA);
  const Eigen::Matrix<double, 9, 1> e = eig.eigenvectors().col(0);
  Mat3 En;
  En << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  const Mat3 E = project_to_essential(T2.transpose() * En * T1);
  const double norm = E.norm();
  return norm > 0.0 ? Mat3(E / norm) : E;
}

inline Mat3 fundamental_from_essential(const Mat3& E, const CameraIntrinsics& k1, const CameraIntrinsics& k2) {
  return k2.matrix().inverse().transpose() * E * k1.matrix().inverse();
}

/// Sampson distance in pixels (square root of the first-order geometric error).
inline double sampson_distance(const Mat3& F, const Vec2& p1, const Vec2& p2) {
  const Vec3 a = p1.homogeneous(), b = p2.homogeneous();
  const Vec3 Fa = F * a;
  const Vec3 Ftb = F.transpose() * b;
  const double num = b.dot(Fa);
  const double den = Fa.x() * Fa.x() + Fa.y() * Fa.y() + Ftb.x() * Ftb.x() + Ftb.y() * Ftb.y();
  if (!(den > 0.0)) return std::numeric_limits<double>::infinity();
  return std::abs(num) / std::sqrt(den);
}

/// The four (R, t) factorizations of E, |t| = 1.
inline std::array<Pose, 4> decompose_essential(const Mat3& E) {
  Eigen::JacobiSVD<Mat3> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 U = svd.matrixU(), V = svd.matrixV();
  if (U.determinant() < 0) U = -U;
  if (V.determinant() < 0) V = -V;
  Mat3 W;
  W << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Mat3 Ra = U * W * V.transpose();
  const Mat3 Rb = U * W.transpose() * V.transpose();
  const Vec3 t = U.col(2).normalized();
  return {Pose::from_matrix(Ra, t), Pose::from_matrix(Ra, -t), Pose::from_matrix(Rb, t), Pose::from_matrix(Rb, -t)};
}

inline Mat34 projection_matrix(const Pose& pose) {
  Mat34 P;
  P.leftCols<3>() = pose.rotation_matrix();
  P.col(3) = pose.translation;
  return P;
}

/// Linear (DLT) triangulation from normalized coordinates and poses.
inline Vec3 triangulate_linear(const std::vector<Pose>& poses, const std::vector<Vec2>& x) {
  require(poses.size() == x.size() && poses.size() >= 2, ErrorCode::InvalidArgument,
          "triangulation needs two or more views");
  Eigen::MatrixXd A(2 * static_cast<Eigen::Index>(poses.size()), 4);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const Mat34 P = projection_matrix(poses[i]);
    A.row(2 * i) = x[i].x() * P.row(2) - P.row(0);
    A.row(2 * i + 1) = x[i].y() * P.row(2) - P.row(1);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::Vector4d X = svd.matrixV().col(3);
  return X.head<3>() / X(3);
}

/// Angle between the viewing rays of X from two camera centers (radians).
inline double triangulation_angle(const Vec3& X, const Vec3& c1, const Vec3& c2) {
  const Vec3 a = (X - c1).normalized(), b = (X - c2).normalized();
  return std::acos(std::clamp(a.dot(b), -1.0, 1.0));
}

/// Least-squares point closest to all viewing rays (centers c_i, unit directions d_i).
inline Vec3 triangulate_midpoint(const std::vector<Vec3>& centers, const std::vector<Vec3>& dirs) {
  require(centers.size() == dirs.size() && centers.size() >= 2, ErrorCode::InvalidArgument,
          "triangulation needs two or more rays");
  Mat3 A = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const Mat3 P = Mat3::Identity() - dirs[i] * dirs[i].transpose();
    A += P;
    b += P * centers[i];
  }
  return A.ldlt().solve(b);
}

/// Camera pose from six or more 2D-3D correspondences (normalized image
/// coordinates) by the direct linear transform, with 3D conditioning.
/// Returns false for degenerate configurations.
inline bool resection_dlt(const std::vector<Vec3>& X, const std::vector<Vec2>& x, const std::vector<int>& idx,
                          Pose* out) {
  const std::size_t n = idx.size();
  if (n < 6) return false;
  Vec3 mean = Vec3::Zero();
  for (int i : idx) mean += X[i];
  mean /= static_cast<double>(n);
  double dist = 0.0;
  for (int i : idx) dist += (X[i] - mean).norm();
  dist /= static_cast<double>(n);
  if (!(dist > 0.0)) return false;
  const double s = std::sqrt(3.0) / dist;
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  T.topLeftCorner<3, 3>() *= s;
  T.topRightCorner<3, 1>() = -s * mean;

  Eigen::MatrixXd A(2 * static_cast<Eigen::Index>(n), 12);
  for (std::size_t r = 0; r < n; ++r) {
    const Eigen::Vector4d Xh = T * X[idx[r]].homogeneous();
    const Vec2& p = x[idx[r]];
    A.row(2 * r) << Xh.transpose(), Eigen::RowVector4d::Zero(), -p.x() * Xh.transpose();
    A.row(2 * r + 1) << Eigen::RowVector4d::Zero(), Xh.transpose(), -p.y() * Xh.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 12, 1> v = svd.matrixV().col(11);
  Mat34 P;
  P << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8), v(9), v(10), v(11);
  P = P * T;
  Mat3 M = P.leftCols<3>();
  Vec3 t = P.col(3);
  if (M.determinant() < 0.0) {
    M = -M;
    t = -t;
  }
  Eigen::JacobiSVD<Mat3> ms(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = ms.singularValues().mean();
  if (!(scale > 0.0) || !std::isfinite(scale)) return false;
  const Mat3 R = ms.matrixU() * ms.matrixV().transpose();
  if (R.determinant() < 0.0) return false;
  *out = Pose::from_matrix(R, t / scale);
  return out->is_valid(1e-6);
}

}  // namespace rigrecon::geometry
