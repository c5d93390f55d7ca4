#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/parallel.hpp"
#include "rigrecon/sfm/model.hpp"

namespace rigrecon::sfm {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat26 = Eigen::Matrix<double, 2, 6>;
using Mat63 = Eigen::Matrix<double, 6, 3>;

/// Soft rig constraint: L and R camera centers expressed in the C frame should
/// equal t_lc and t_cr, and their orientations should match C.
struct RigPrior {
  Vec3 t_lc{-0.31, 0.0, 0.0};
  Vec3 t_cr{0.31, 0.0, 0.0};
  double weight_t = 1e4;  // 1/m^2
  double weight_R = 1e2;  // 1/rad^2

  bool enabled() const { return weight_t > 0.0 || weight_R > 0.0; }
  static RigPrior disabled() {
    RigPrior p;
    p.weight_t = 0.0;
    p.weight_R = 0.0;
    return p;
  }
  void validate() const {
    require(weight_t >= 0.0 && weight_R >= 0.0, ErrorCode::ConfigInvalid, "rig prior weights must be >= 0");
  }
};

/// Pose update used throughout: R <- exp(w) R, t <- t + v, delta = (w, v).
inline Pose apply_pose_update(const Pose& p, const Vec6& delta) {
  return Pose::from_matrix(geometry::so3_exp(delta.head<3>()) * p.rotation_matrix(), p.translation + delta.tail<3>());
}

/// d pixel / d camera-frame point. With zero distortion this is the pinhole
/// Jacobian; otherwise the distortion chain is included.
inline Mat23 projection_jacobian(const Vec3& Xc, const geometry::CameraIntrinsics& intr,
                                 const geometry::DistortionCoeffs& dist = {}) {
  const double iz = 1.0 / Xc.z();
  Mat23 dn;  // d normalized / d Xc
  dn << iz, 0.0, -Xc.x() * iz * iz, 0.0, iz, -Xc.y() * iz * iz;
  Mat2 Jd = Mat2::Identity();
  if (!dist.is_zero()) Jd = geometry::distort_jacobian({Xc.x() * iz, Xc.y() * iz}, dist);
  const Mat2 K = (Mat2() << intr.fx, 0.0, 0.0, intr.fy).finished();
  return K * Jd * dn;
}

struct ReprojectionTerm {
  Vec2 residual = Vec2::Zero();  // projected minus observed, pixels
  Mat26 J_pose = Mat26::Zero();
  Mat23 J_point = Mat23::Zero();
  bool valid = false;  // false when the point is not in front of the camera
};

inline ReprojectionTerm reprojection_term(const Pose& pose, const Vec3& X, const geometry::CameraIntrinsics& intr,
                                          const Vec2& observed, const geometry::DistortionCoeffs& dist = {}) {
  ReprojectionTerm t;
  const Mat3 R = pose.rotation_matrix();
  const Vec3 RX = R * X;
  const Vec3 Xc = RX + pose.translation;
  if (!(Xc.z() > geometry::kMinDepth)) return t;
  t.valid = true;
  const Vec2 xn(Xc.x() / Xc.z(), Xc.y() / Xc.z());
  t.residual = intr.to_pixel(dist.is_zero() ? xn : geometry::distort(xn, dist)) - observed;
  const Mat23 dp = projection_jacobian(Xc, intr, dist);
  t.J_pose.leftCols<3>() = -dp * geometry::skew(RX);
  t.J_pose.rightCols<3>() = dp;
  t.J_point = dp * R;
  return t;
}

struct PriorTerm {
  Vec6 residual = Vec6::Zero();  // sqrt(w_t) * translation error, sqrt(w_R) * rotation log
  Mat6 J_side = Mat6::Zero();
  Mat6 J_center = Mat6::Zero();
};

/// Prior between one side camera (L or R) and the center camera of the same
/// triplet. `expected` is the side camera center in the C frame.
inline PriorTerm rig_prior_term(const Pose& side, const Pose& center, const Vec3& expected, double weight_t,
                                double weight_R) {
  PriorTerm p;
  const Mat3 Rs = side.rotation_matrix(), Rc = center.rotation_matrix();
  const Vec3 cs = -(Rs.transpose() * side.translation);
  const Vec3 in_c = Rc * cs + center.translation;
  const double st = std::sqrt(weight_t), sr = std::sqrt(weight_R);
  p.residual.head<3>() = st * (in_c - expected);
  const Mat3 Rrel = Rs * Rc.transpose();
  const Vec3 phi = geometry::so3_log(Rrel);
  p.residual.tail<3>() = sr * phi;

  // d cs / d(w_s, v_s) = (-Rs^T [t_s]x, -Rs^T)
  p.J_side.block<3, 3>(0, 0) = st * (-Rc * Rs.transpose() * geometry::skew(side.translation));
  p.J_side.block<3, 3>(0, 3) = st * (-Rc * Rs.transpose());
  p.J_center.block<3, 3>(0, 0) = st * (-geometry::skew(Rc * cs));
  p.J_center.block<3, 3>(0, 3) = st * Mat3::Identity();
  const Mat3 Jinv = geometry::so3_left_jacobian_inverse(phi);
  p.J_side.block<3, 3>(3, 0) = sr * Jinv;
  p.J_center.block<3, 3>(3, 0) = -sr * Jinv * Rrel;
  return p;
}

/// Huber on the squared residual norm s: s inside the scale, 2k sqrt(s) - k^2 outside.
inline double huber(double s, double k) { return s <= k * k ? s : 2.0 * k * std::sqrt(s) - k * k; }
inline double huber_weight(double s, double k) { return s <= k * k ? 1.0 : k / std::sqrt(s); }

struct BundleOptions {
  double huber_px = 2.0;  // <= 0 disables the robustifier
  double lambda0 = 1e-3;
  int max_iterations = 200;
  double relative_tolerance = 1e-8;
  bool refine_points = true;
  std::vector<int> fixed_images;  // in addition to the anchor
};

struct BundleReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  int accepted = 0;
  bool converged = false;
  int anchor = -1;
  std::vector<double> cost_history;  // cost after each accepted step, starting with the initial cost
};

namespace detail {

struct BaObservation {
  int point;
  int image;
  Vec2 observed;
};

struct RigLink {
  int side;
  int center;
  Vec3 expected;
};

inline std::vector<RigLink> rig_links(const SparseModel& m, const RigPrior& prior) {
  std::vector<RigLink> links;
  if (!prior.enabled()) return links;
  std::map<int, std::array<int, 3>> by_triplet;
  for (std::size_t id = 0; id < m.images.size(); ++id) {
    const ModelImage& im = m.images[id];
    if (!im.registered) continue;
    auto [it, inserted] = by_triplet.try_emplace(im.triplet, std::array<int, 3>{-1, -1, -1});
    it->second[static_cast<std::size_t>(index_of(im.camera))] = static_cast<int>(id);
  }
  for (const auto& [triplet, ids] : by_triplet) {
    if (ids[1] < 0) continue;
    if (ids[0] >= 0) links.push_back({ids[0], ids[1], prior.t_lc});
    if (ids[2] >= 0) links.push_back({ids[2], ids[1], prior.t_cr});
  }
  return links;
}

// Zero-initialized block of a block-sparse map (Eigen matrices start uninitialized).
inline Mat6& block(std::map<std::pair<int, int>, Mat6>& blocks, int r, int c) {
  return blocks.try_emplace({r, c}, Mat6::Zero()).first->second;
}

}  // namespace detail

/// Lowest-id registered C image, else the lowest-id registered image.
inline int anchor_image(const SparseModel& m) {
  int first = -1;
  for (std::size_t id = 0; id < m.images.size(); ++id) {
    if (!m.images[id].registered) continue;
    if (m.images[id].camera == CameraId::C) return static_cast<int>(id);
    if (first < 0) first = static_cast<int>(id);
  }
  return first;
}

/// Robust reprojection cost plus rig prior cost of the current model.
inline double bundle_cost(const SparseModel& m, const RigPrior& prior, double huber_px) {
  double cost = 0.0;
  for (const ModelPoint& p : m.points)
    for (const Observation& o : p.obs) {
      if (!m.registered(o.image)) continue;
      const double e = reprojection_error(m, p.xyz, o);
      if (!std::isfinite(e)) return std::numeric_limits<double>::infinity();
      cost += huber_px > 0.0 ? huber(e * e, huber_px) : e * e;
    }
  for (const auto& l : detail::rig_links(m, prior))
    cost += rig_prior_term(m.pose(l.side), m.pose(l.center), l.expected, prior.weight_t, prior.weight_R)
                .residual.squaredNorm();
  return cost;
}

/// Levenberg-Marquardt over registered poses and points. The reduced camera
/// system (points eliminated by Schur complement) is solved with a sparse
/// LDLT. Returns the best iterate; `converged` is false when the iteration
/// budget ran out first.
inline BundleReport bundle_adjust(SparseModel& m, const RigPrior& prior, const BundleOptions& opts = {}) {
  prior.validate();
  BundleReport rep;
  rep.anchor = anchor_image(m);
  const int n_images = static_cast<int>(m.images.size());
  std::vector<int> slot(static_cast<std::size_t>(n_images), -1);
  int nc = 0;
  for (int id = 0; id < n_images; ++id) {
    if (!m.registered(id) || id == rep.anchor) continue;
    if (std::find(opts.fixed_images.begin(), opts.fixed_images.end(), id) != opts.fixed_images.end()) continue;
    slot[static_cast<std::size_t>(id)] = nc++;
  }
  std::vector<detail::BaObservation> obs;
  std::vector<std::vector<int>> point_obs(m.points.size());
  for (std::size_t p = 0; p < m.points.size(); ++p)
    for (const Observation& o : m.points[p].obs) {
      if (!m.registered(o.image)) continue;
      point_obs[p].push_back(static_cast<int>(obs.size()));
      obs.push_back({static_cast<int>(p), o.image, m.observed(o)});
    }
  const auto links = detail::rig_links(m, prior);
  const double k = opts.huber_px;

  double cost = bundle_cost(m, prior, k);
  require(std::isfinite(cost), ErrorCode::InvalidArgument, "bundle adjustment started with a point behind a camera");
  rep.initial_cost = cost;
  rep.cost_history.push_back(cost);
  double lambda = opts.lambda0;

  std::vector<ReprojectionTerm> terms(obs.size());
  std::vector<double> weights(obs.size());
  const std::size_t np = m.points.size();
  std::vector<Mat6> U(static_cast<std::size_t>(nc));
  std::vector<Vec6> gc(static_cast<std::size_t>(nc));
  std::vector<Mat3> V(np);
  std::vector<Vec3> gp(np);
  std::vector<Mat63> W(obs.size());

  while (rep.iterations < opts.max_iterations) {
    // Linearize.
    parallel_for(obs.size(), [&](std::size_t i) {
      const auto& ob = obs[i];
      terms[i] = reprojection_term(m.pose(ob.image), m.points[static_cast<std::size_t>(ob.point)].xyz,
                                   m.intrinsics(ob.image), ob.observed);
      const double s = terms[i].residual.squaredNorm();
      weights[i] = k > 0.0 ? huber_weight(s, k) : 1.0;
    });
    std::fill(U.begin(), U.end(), Mat6::Zero());
    std::fill(gc.begin(), gc.end(), Vec6::Zero());
    std::fill(V.begin(), V.end(), Mat3::Zero());
    std::fill(gp.begin(), gp.end(), Vec3::Zero());
    std::map<std::pair<int, int>, Mat6> offdiag;  // (row slot < col slot)
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const auto& t = terms[i];
      const double w = weights[i];
      const int c = slot[static_cast<std::size_t>(obs[i].image)];
      const auto p = static_cast<std::size_t>(obs[i].point);
      if (opts.refine_points) {
        V[p] += w * t.J_point.transpose() * t.J_point;
        gp[p] += w * t.J_point.transpose() * t.residual;
      }
      if (c >= 0) {
        U[static_cast<std::size_t>(c)] += w * t.J_pose.transpose() * t.J_pose;
        gc[static_cast<std::size_t>(c)] += w * t.J_pose.transpose() * t.residual;
        W[i] = w * t.J_pose.transpose() * t.J_point;
      }
    }
    for (const auto& l : links) {
      const PriorTerm pt = rig_prior_term(m.pose(l.side), m.pose(l.center), l.expected, prior.weight_t, prior.weight_R);
      const int a = slot[static_cast<std::size_t>(l.side)], b = slot[static_cast<std::size_t>(l.center)];
      if (a >= 0) {
        U[static_cast<std::size_t>(a)] += pt.J_side.transpose() * pt.J_side;
        gc[static_cast<std::size_t>(a)] += pt.J_side.transpose() * pt.residual;
      }
      if (b >= 0) {
        U[static_cast<std::size_t>(b)] += pt.J_center.transpose() * pt.J_center;
        gc[static_cast<std::size_t>(b)] += pt.J_center.transpose() * pt.residual;
      }
      if (a >= 0 && b >= 0) {
        const Mat6 cross = pt.J_side.transpose() * pt.J_center;
        if (a < b) detail::block(offdiag, a, b) += cross;
        else detail::block(offdiag, b, a) += cross.transpose();
      }
    }

    double gnorm = 0.0;
    for (const auto& g : gc) gnorm = std::max(gnorm, g.cwiseAbs().maxCoeff());
    if (opts.refine_points)
      for (const auto& g : gp) gnorm = std::max(gnorm, g.cwiseAbs().maxCoeff());
    if (gnorm < 1e-14 || cost == 0.0) {
      rep.converged = true;
      break;
    }

    // Damped solve; retried with larger damping until a step is accepted.
    bool accepted = false;
    while (!accepted && rep.iterations < opts.max_iterations) {
      ++rep.iterations;
      std::vector<Mat3> Vinv(np);
      for (std::size_t p = 0; p < np; ++p) {
        Mat3 Vd = V[p];
        Vd.diagonal() *= 1.0 + lambda;
        Vinv[p] = opts.refine_points && Vd.determinant() > 0.0 ? Mat3(Vd.inverse()) : Mat3::Zero();
      }
      std::map<std::pair<int, int>, Mat6> S = offdiag;
      std::vector<Vec6> rhs(static_cast<std::size_t>(nc));
      for (int c = 0; c < nc; ++c) {
        Mat6 Ud = U[static_cast<std::size_t>(c)];
        Ud.diagonal() *= 1.0 + lambda;
        Ud.diagonal().array() += 1e-12;
        detail::block(S, c, c) += Ud;
        rhs[static_cast<std::size_t>(c)] = -gc[static_cast<std::size_t>(c)];
      }
      if (opts.refine_points) {
        for (std::size_t p = 0; p < np; ++p) {
          const auto& po = point_obs[p];
          for (std::size_t x = 0; x < po.size(); ++x) {
            const int ca = slot[static_cast<std::size_t>(obs[po[x]].image)];
            if (ca < 0) continue;
            const Mat63 T = W[po[x]] * Vinv[p];
            rhs[static_cast<std::size_t>(ca)] += T * gp[p];
            for (std::size_t y = 0; y < po.size(); ++y) {
              const int cb = slot[static_cast<std::size_t>(obs[po[y]].image)];
              if (cb < ca) continue;
              detail::block(S, ca, cb) -= T * W[po[y]].transpose();
            }
          }
        }
      }
      std::vector<Eigen::Triplet<double>> trip;
      for (const auto& [key, blk] : S)
        for (int r = 0; r < 6; ++r)
          for (int c = 0; c < 6; ++c) {
            if (key.first == key.second && c < r) continue;
            // Lower triangle: block (b, a) holds blk^T.
            trip.emplace_back(6 * key.second + c, 6 * key.first + r, blk(r, c));
          }
      Eigen::SparseMatrix<double> A(6 * nc, 6 * nc);
      A.setFromTriplets(trip.begin(), trip.end());
      Eigen::VectorXd b(6 * nc);
      for (int c = 0; c < nc; ++c) b.segment<6>(6 * c) = rhs[static_cast<std::size_t>(c)];
      Eigen::VectorXd dc = Eigen::VectorXd::Zero(6 * nc);
      if (nc > 0) {
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>, Eigen::Lower> ldlt(A);
        if (ldlt.info() != Eigen::Success) {
          lambda *= 10.0;
          continue;
        }
        dc = ldlt.solve(b);
      }

      SparseModel trial = m;
      for (int id = 0; id < n_images; ++id) {
        const int c = slot[static_cast<std::size_t>(id)];
        if (c >= 0) trial.images[static_cast<std::size_t>(id)].pose = apply_pose_update(m.pose(id), dc.segment<6>(6 * c));
      }
      if (opts.refine_points) {
        for (std::size_t p = 0; p < np; ++p) {
          Vec3 r = -gp[p];
          for (int oi : point_obs[p]) {
            const int c = slot[static_cast<std::size_t>(obs[oi].image)];
            if (c >= 0) r -= W[oi].transpose() * dc.segment<6>(6 * c);
          }
          trial.points[p].xyz += Vinv[p] * r;
        }
      }
      const double new_cost = bundle_cost(trial, prior, k);
      if (std::isfinite(new_cost) && new_cost <= cost) {
        const double rel = (cost - new_cost) / std::max(cost, 1e-300);
        m = std::move(trial);
        cost = new_cost;
        rep.cost_history.push_back(cost);
        ++rep.accepted;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        if (rel < opts.relative_tolerance) rep.converged = true;
      } else {
        lambda *= 10.0;
        if (lambda > 1e16) {
          rep.converged = true;  // no descent direction left at machine precision
          break;
        }
      }
    }
    if (rep.converged || !accepted) break;
  }
  rep.final_cost = cost;
  m.stats = model_stats(m);
  return rep;
}

}  // namespace rigrecon::sfm
