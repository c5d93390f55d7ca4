#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/json_io.hpp"
#include "rigrecon/geometry/camera.hpp"
#include "rigrecon/imaging/filters.hpp"

namespace rigrecon::sfm {

using geometry::Mat3;
using geometry::Pose;
using geometry::Vec2;
using geometry::Vec3;

/// ChArUco board: 53 x 37 squares of 22 mm, so 52 x 36 inner corners.
/// Corner id = row * corners_x + col, board coordinates (col, row) * square.
struct BoardGeometry {
  int squares_x = 53;
  int squares_y = 37;
  double square = 0.022;

  int corners_x() const { return squares_x - 1; }
  int corners_y() const { return squares_y - 1; }
  int num_corners() const { return corners_x() * corners_y(); }
  Vec3 corner(int id) const { return {(id % corners_x()) * square, (id / corners_x()) * square, 0.0}; }
  Vec3 center() const { return {0.5 * (corners_x() - 1) * square, 0.5 * (corners_y() - 1) * square, 0.0}; }
};

struct CalibrationObservation {
  int corner_id = 0;
  Vec3 board = Vec3::Zero();
  Vec2 pixel = Vec2::Zero();
  int frame = 0;
};

/// Throws InvalidArgument when a board coordinate disagrees with the geometry.
inline void check_observations(const std::vector<CalibrationObservation>& obs, const BoardGeometry& board) {
  for (const auto& o : obs) {
    require(o.corner_id >= 0 && o.corner_id < board.num_corners(), ErrorCode::InvalidArgument,
            "corner id " + std::to_string(o.corner_id) + " outside the board");
    require((o.board - board.corner(o.corner_id)).norm() < 1e-9, ErrorCode::InvalidArgument,
            "board coordinate of corner " + std::to_string(o.corner_id) + " disagrees with the board geometry");
  }
}

struct CalibrationOptions {
  int max_iterations = 200;
  double lambda0 = 1e-3;
  double gradient_tolerance = 1e-6;
  double cost_tolerance = 1e-12;  // relative change on an accepted step
  int min_frames = 4;
  int min_corners = 20;
  double min_view_spread_deg = 5.0;  // largest angle between board normals
};

struct CalibrationResult {
  geometry::CameraModel model;
  std::vector<int> frames;  // frame ids that took part, ascending
  std::vector<Pose> poses;  // board-to-camera, parallel to `frames`
  double rms = 0.0;
  double initial_rms = 0.0;
  double gradient_norm = 0.0;  // |D^-1/2 g| with D = diag(J^T J), unit free
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_history;  // cost after each accepted step, starting with the initial cost
};

namespace detail {

inline constexpr int kIntrParams = 12;  // fx, fy, cx, cy, k1..k6, p1, p2

/// Pixel prediction and its Jacobians w.r.t. the 12 camera parameters and
/// the left pose perturbation (w, v).
struct CalibTerm {
  Vec2 residual = Vec2::Zero();  // predicted - observed
  Eigen::Matrix<double, 2, kIntrParams> J_cam;
  Eigen::Matrix<double, 2, 6> J_pose;
  bool valid = false;
};

inline CalibTerm calib_term(const geometry::CameraModel& cam, const Pose& pose, const Vec3& X, const Vec2& observed) {
  CalibTerm out;
  const Mat3 R = pose.rotation_matrix();
  const Vec3 RX = R * X;
  const Vec3 Xc = RX + pose.translation;
  if (!(Xc.z() > geometry::kMinDepth)) return out;
  const double iz = 1.0 / Xc.z();
  const Vec2 xn(Xc.x() * iz, Xc.y() * iz);
  const Vec2 xd = geometry::distort(xn, cam.dist);
  const auto& d = cam.dist;
  const double fx = cam.intr.fx, fy = cam.intr.fy;
  out.residual = Vec2(fx * xd.x() + cam.intr.cx, fy * xd.y() + cam.intr.cy) - observed;

  const double x = xn.x(), y = xn.y();
  const double r2 = x * x + y * y, r4 = r2 * r2, r6 = r4 * r2;
  const double num = 1 + d.k1 * r2 + d.k2 * r4 + d.k3 * r6;
  const double den = 1 + d.k4 * r2 + d.k5 * r4 + d.k6 * r6;
  // d(xd, yd)/d(k1..k6, p1, p2)
  Eigen::Matrix<double, 2, 8> Jd;
  const double a = 1.0 / den, b = -num / (den * den);
  const double rk[3] = {r2, r4, r6};
  for (int i = 0; i < 3; ++i) {
    Jd(0, i) = x * rk[i] * a;
    Jd(1, i) = y * rk[i] * a;
    Jd(0, 3 + i) = x * rk[i] * b;
    Jd(1, 3 + i) = y * rk[i] * b;
  }
  Jd(0, 6) = 2 * x * y;
  Jd(1, 6) = r2 + 2 * y * y;
  Jd(0, 7) = r2 + 2 * x * x;
  Jd(1, 7) = 2 * x * y;

  out.J_cam.setZero();
  out.J_cam(0, 0) = xd.x();
  out.J_cam(1, 1) = xd.y();
  out.J_cam(0, 2) = 1.0;
  out.J_cam(1, 3) = 1.0;
  out.J_cam.row(0).tail<8>() = fx * Jd.row(0);
  out.J_cam.row(1).tail<8>() = fy * Jd.row(1);

  Eigen::Matrix<double, 2, 3> dn;
  dn << iz, 0.0, -x * iz, 0.0, iz, -y * iz;
  const Eigen::Matrix<double, 2, 3> dp = Eigen::Vector2d(fx, fy).asDiagonal() * geometry::distort_jacobian(xn, d) * dn;
  out.J_pose.leftCols<3>() = -dp * geometry::skew(RX);
  out.J_pose.rightCols<3>() = dp;
  out.valid = true;
  return out;
}

inline std::array<double, kIntrParams> camera_params(const geometry::CameraModel& m) {
  std::array<double, kIntrParams> p{};
  p[0] = m.intr.fx;
  p[1] = m.intr.fy;
  p[2] = m.intr.cx;
  p[3] = m.intr.cy;
  const auto c = m.dist.as_array();
  std::copy(c.begin(), c.end(), p.begin() + 4);
  return p;
}

inline geometry::CameraModel with_params(geometry::CameraModel m, const std::array<double, kIntrParams>& p) {
  m.intr.fx = p[0];
  m.intr.fy = p[1];
  m.intr.cx = p[2];
  m.intr.cy = p[3];
  std::array<double, 8> c{};
  std::copy(p.begin() + 4, p.end(), c.begin());
  m.dist = geometry::DistortionCoeffs::from_array(c);
  return m;
}

/// Plane-to-image homography (DLT with conditioning on both sides).
inline Mat3 fit_homography(const std::vector<Vec2>& src, const std::vector<Vec2>& dst) {
  auto conditioner = [](const std::vector<Vec2>& x) {
    Vec2 mean = Vec2::Zero();
    for (const auto& p : x) mean += p;
    mean /= static_cast<double>(x.size());
    double dist = 0.0;
    for (const auto& p : x) dist += (p - mean).norm();
    dist /= static_cast<double>(x.size());
    const double s = dist > 0.0 ? std::sqrt(2.0) / dist : 1.0;
    Mat3 T;
    T << s, 0, -s * mean.x(), 0, s, -s * mean.y(), 0, 0, 1;
    return T;
  };
  const Mat3 Ts = conditioner(src), Td = conditioner(dst);
  Eigen::MatrixXd A(2 * static_cast<Eigen::Index>(src.size()), 9);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 s = Ts * src[i].homogeneous(), d = Td * dst[i].homogeneous();
    A.row(2 * i) << s.transpose(), 0, 0, 0, -d.x() * s.transpose();
    A.row(2 * i + 1) << 0, 0, 0, s.transpose(), -d.y() * s.transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Mat3 H;
  H << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return Td.inverse() * H * Ts;
}

/// Board pose from a homography between board (X, Y) and normalized coordinates.
inline Pose pose_from_homography(const Mat3& H) {
  const double lambda = 2.0 / (H.col(0).norm() + H.col(1).norm());
  Vec3 r1 = lambda * H.col(0), r2 = lambda * H.col(1), t = lambda * H.col(2);
  if (t.z() < 0.0) {
    r1 = -r1;
    r2 = -r2;
    t = -t;
  }
  Mat3 M;
  M << r1, r2, r1.cross(r2);
  Eigen::JacobiSVD<Mat3> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 R = svd.matrixU() * svd.matrixV().transpose();
  if (R.determinant() < 0.0) R = -R;
  return Pose::from_matrix(R, t);
}

}  // namespace detail

/// Joint Levenberg-Marquardt over fx, fy, cx, cy, the eight distortion
/// coefficients and one board pose per frame. Poses start from homographies
/// fitted to the observations undistorted with `init`. RMS is
/// sqrt(sum |p - p_hat|^2 / N) over all N corners.
inline CalibrationResult calibrate(const std::vector<CalibrationObservation>& observations,
                                   const geometry::CameraModel& init, const CalibrationOptions& opts = {}) {
  init.intr.validate();
  std::map<int, std::vector<const CalibrationObservation*>> by_frame;
  for (const auto& o : observations) by_frame[o.frame].push_back(&o);
  CalibrationResult res;
  std::vector<std::vector<const CalibrationObservation*>> frames;
  for (auto& [id, list] : by_frame) {
    if (static_cast<int>(list.size()) < opts.min_corners) continue;
    res.frames.push_back(id);
    frames.push_back(std::move(list));
  }
  const int F = static_cast<int>(frames.size());
  require(F >= opts.min_frames, ErrorCode::InvalidArgument,
          std::to_string(F) + " frames with " + std::to_string(opts.min_corners) + "+ corners, " +
              std::to_string(opts.min_frames) + " needed");

  const geometry::Undistorter undistort(init.dist);
  for (const auto& list : frames) {
    std::vector<Vec2> src, dst;
    for (const auto* o : list) {
      src.emplace_back(o->board.x(), o->board.y());
      dst.push_back(undistort(init.intr.to_normalized(o->pixel)));
    }
    res.poses.push_back(detail::pose_from_homography(detail::fit_homography(src, dst)));
  }
  double spread = 0.0;
  for (int i = 0; i < F; ++i)
    for (int j = i + 1; j < F; ++j) {
      const Vec3 ni = res.poses[i].rotation * Vec3::UnitZ(), nj = res.poses[j].rotation * Vec3::UnitZ();
      spread = std::max(spread, std::acos(std::clamp(ni.dot(nj), -1.0, 1.0)));
    }
  if (geometry::rad2deg(spread) < opts.min_view_spread_deg)
    fail(ErrorCode::RankDeficient, "board orientations span " + std::to_string(geometry::rad2deg(spread)) +
                                       " degrees; focal length is not observable");

  constexpr int C = detail::kIntrParams;
  const int n = C + 6 * F;
  std::size_t total = 0;
  for (const auto& list : frames) total += list.size();

  auto evaluate = [&](const geometry::CameraModel& cam, const std::vector<Pose>& poses, Eigen::MatrixXd* H,
                      Eigen::VectorXd* g) {
    double cost = 0.0;
    if (H) {
      H->setZero(n, n);
      g->setZero(n);
    }
    for (int f = 0; f < F; ++f) {
      const int o = C + 6 * f;
      for (const auto* ob : frames[f]) {
        const auto term = detail::calib_term(cam, poses[f], ob->board, ob->pixel);
        if (!term.valid) return std::numeric_limits<double>::infinity();
        cost += term.residual.squaredNorm();
        if (!H) continue;
        H->topLeftCorner<C, C>().noalias() += term.J_cam.transpose() * term.J_cam;
        H->block<C, 6>(0, o).noalias() += term.J_cam.transpose() * term.J_pose;
        H->block<6, 6>(o, o).noalias() += term.J_pose.transpose() * term.J_pose;
        g->head<C>().noalias() += term.J_cam.transpose() * term.residual;
        g->segment<6>(o).noalias() += term.J_pose.transpose() * term.residual;
      }
    }
    if (H) H->triangularView<Eigen::StrictlyLower>() = H->transpose();
    return 0.5 * cost;
  };

  geometry::CameraModel cam = init;
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  auto scaled_gradient = [&] { return (g.array() / H.diagonal().array().max(1e-12).sqrt()).matrix().norm(); };
  double cost = evaluate(cam, res.poses, &H, &g);
  require(std::isfinite(cost), ErrorCode::NotConverged, "initial board poses put corners behind the camera");
  res.initial_rms = std::sqrt(2.0 * cost / static_cast<double>(total));
  res.cost_history.push_back(cost);
  double lambda = opts.lambda0;
  bool plateau = false;
  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it + 1;
    res.gradient_norm = scaled_gradient();
    if (res.gradient_norm < opts.gradient_tolerance) break;
    Eigen::MatrixXd A = H;
    A.diagonal() += lambda * H.diagonal().cwiseMax(1e-12);
    const Eigen::VectorXd delta = A.ldlt().solve(-g);
    auto p = detail::camera_params(cam);
    for (int k = 0; k < C; ++k) p[k] += delta(k);
    const geometry::CameraModel trial_cam = detail::with_params(cam, p);
    std::vector<Pose> trial_poses = res.poses;
    for (int f = 0; f < F; ++f) {
      const Eigen::Matrix<double, 6, 1> d = delta.segment<6>(C + 6 * f);
      trial_poses[f].rotation = Eigen::Quaterniond(geometry::so3_exp(d.head<3>()) * trial_poses[f].rotation_matrix());
      trial_poses[f].rotation.normalize();
      trial_poses[f].translation += d.tail<3>();
    }
    const double trial = delta.allFinite() ? evaluate(trial_cam, trial_poses, nullptr, nullptr)
                                           : std::numeric_limits<double>::infinity();
    if (trial < cost) {
      const double change = (cost - trial) / cost;
      cam = trial_cam;
      res.poses = std::move(trial_poses);
      cost = evaluate(cam, res.poses, &H, &g);
      res.cost_history.push_back(cost);
      lambda = std::max(lambda * 0.1, 1e-15);
      if (change < opts.cost_tolerance) {
        plateau = true;
        res.gradient_norm = scaled_gradient();
        break;
      }
    } else {
      lambda *= 10.0;
      if (lambda > 1e16) {
        plateau = true;
        break;
      }
    }
  }
  res.gradient_norm = scaled_gradient();
  res.converged = plateau || res.gradient_norm < opts.gradient_tolerance;
  res.model = cam;
  res.rms = std::sqrt(2.0 * cost / static_cast<double>(total));
  if (!res.converged)
    fail(ErrorCode::NotConverged, "calibration stopped after " + std::to_string(res.iterations) +
                                      " iterations with gradient norm " + std::to_string(res.gradient_norm));
  return res;
}

/// Largest pixel distance between the distortion mappings of two models over
/// a grid of normalized points inside `radius`.
inline double distortion_mapping_difference(const geometry::CameraModel& a, const geometry::CameraModel& b,
                                            double radius, int steps = 41) {
  double worst = 0.0;
  for (int i = 0; i < steps; ++i)
    for (int j = 0; j < steps; ++j) {
      const Vec2 x(radius * (2.0 * i / (steps - 1) - 1.0), radius * (2.0 * j / (steps - 1) - 1.0));
      if (x.norm() > radius) continue;
      const Vec2 pa = a.intr.to_pixel(geometry::distort(x, a.dist));
      const Vec2 pb = b.intr.to_pixel(geometry::distort(x, b.dist));
      worst = std::max(worst, (pa - pb).norm());
    }
  return worst;
}

/// Index of the sharpest frame in each non-overlapping window of `window`
/// scores; the last window may be shorter.
inline std::vector<int> curate_by_score(const std::vector<double>& scores, int window = 10) {
  require(window >= 1, ErrorCode::InvalidArgument, "curation window must be positive");
  std::vector<int> out;
  for (std::size_t start = 0; start < scores.size(); start += static_cast<std::size_t>(window)) {
    const std::size_t end = std::min(scores.size(), start + static_cast<std::size_t>(window));
    out.push_back(static_cast<int>(std::max_element(scores.begin() + static_cast<std::ptrdiff_t>(start),
                                                    scores.begin() + static_cast<std::ptrdiff_t>(end)) -
                                   scores.begin()));
  }
  return out;
}

/// Keeps the highest Laplacian-variance frame per window of `window` frames.
inline std::vector<int> frame_curation(const std::vector<imaging::Image>& frames, int window = 10) {
  std::vector<double> scores(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) scores[i] = imaging::laplacian_variance(frames[i]).value;
  return curate_by_score(scores, window);
}

inline Json observations_to_json(const std::vector<CalibrationObservation>& obs) {
  Json arr = Json::array();
  for (const auto& o : obs)
    arr.push_back({{"corner", o.corner_id},
                   {"frame", o.frame},
                   {"board", {o.board.x(), o.board.y(), o.board.z()}},
                   {"pixel", {o.pixel.x(), o.pixel.y()}}});
  return Json{{"observations", arr}};
}

inline std::vector<CalibrationObservation> observations_from_json(const Json& doc) {
  std::vector<CalibrationObservation> out;
  for (const Json& o : json_get<Json>(doc, "observations")) {
    CalibrationObservation c;
    c.corner_id = json_get<int>(o, "corner");
    c.frame = json_get<int>(o, "frame");
    const auto b = json_get<std::vector<double>>(o, "board");
    const auto p = json_get<std::vector<double>>(o, "pixel");
    require(b.size() == 3 && p.size() == 2, ErrorCode::ParseError, "observation needs board[3] and pixel[2]");
    c.board = Vec3(b[0], b[1], b[2]);
    c.pixel = Vec2(p[0], p[1]);
    out.push_back(c);
  }
  return out;
}

}  // namespace rigrecon::sfm
