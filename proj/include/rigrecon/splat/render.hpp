#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "rigrecon/core/parallel.hpp"
#include "rigrecon/geometry/camera.hpp"
#include "rigrecon/imaging/image.hpp"
#include "rigrecon/splat/gaussian.hpp"

namespace rigrecon::splat {

using Mat2 = geometry::Mat2;
using Mat23 = Eigen::Matrix<double, 2, 3>;

struct Camera {
  Pose pose;  // world to camera
  geometry::CameraIntrinsics intr;
};

struct RenderOptions {
  double near = 0.01;       // meters; Gaussians closer than this are culled
  double dilation = 0.3;    // px^2 added to each projected covariance
  double cutoff_sigma = 3.0;
};

/// Color plus per-pixel accumulated opacity (1 - final transmittance) and
/// the directly summed compositing weights.
struct RenderTarget {
  int width = 0;
  int height = 0;
  imaging::Image color;
  std::vector<double> opacity;
  std::vector<double> weight_sum;
};

/// Per-view intermediate values kept for the backward pass.
struct RenderState {
  struct Projection {
    int index = 0;  // into the cloud
    double depth = 0.0;
    Vec2 mean = Vec2::Zero();
    Mat2 conic = Mat2::Zero();  // inverse projected covariance
    Mat23 T = Mat23::Zero();    // J * W
    Mat23 J = Mat23::Zero();
    Vec3 Xc = Vec3::Zero();
    Mat3 sigma = Mat3::Zero();  // world covariance
    int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
  };
  std::vector<Projection> proj;  // front to back
  std::vector<int> offsets;       // per pixel into entries, size pixels + 1
  std::vector<int> entries;       // projection indices, front to back per pixel
  std::vector<double> a;          // effective opacity per entry, < 0 when outside the cutoff
  std::vector<double> T;          // transmittance before the entry
  std::vector<double> T_final;    // per pixel
};

/// Dilated image-plane covariance J W Sigma W^T J^T.
inline bool project_gaussian(const Gaussian& g, const Camera& cam, const RenderOptions& opts,
                             RenderState::Projection* p) {
  const Mat3 W = cam.pose.rotation_matrix();
  const Vec3 Xc = W * g.mu + cam.pose.translation;
  if (!(Xc.z() > opts.near)) return false;
  const double fx = cam.intr.fx, fy = cam.intr.fy, iz = 1.0 / Xc.z();
  Mat23 J;
  J << fx * iz, 0.0, -fx * Xc.x() * iz * iz, 0.0, fy * iz, -fy * Xc.y() * iz * iz;
  const Mat3 sigma = g.covariance();
  const Mat23 T = J * W;
  Mat2 cov = T * sigma * T.transpose();
  cov(0, 0) += opts.dilation;
  cov(1, 1) += opts.dilation;
  const double det = cov.determinant();
  if (!(det > 0.0) || !std::isfinite(det)) return false;
  p->depth = Xc.z();
  p->mean = Vec2(fx * Xc.x() * iz + cam.intr.cx, fy * Xc.y() * iz + cam.intr.cy);
  p->conic = cov.inverse();
  p->T = T;
  p->J = J;
  p->Xc = Xc;
  p->sigma = sigma;
  const double mid = 0.5 * (cov(0, 0) + cov(1, 1));
  const double lmax = mid + std::sqrt(std::max(0.0, mid * mid - det));
  const double r = opts.cutoff_sigma * std::sqrt(lmax);
  p->x0 = std::max(0, static_cast<int>(std::ceil(p->mean.x() - r)));
  p->x1 = std::min(cam.intr.width - 1, static_cast<int>(std::floor(p->mean.x() + r)));
  p->y0 = std::max(0, static_cast<int>(std::ceil(p->mean.y() - r)));
  p->y1 = std::min(cam.intr.height - 1, static_cast<int>(std::floor(p->mean.y() + r)));
  return p->x0 <= p->x1 && p->y0 <= p->y1;
}

/// Front-to-back compositing: w_i = a_i prod_{j<i} (1 - a_j) with
/// a_i = alpha_i exp(-d^T Sigma2D^-1 d / 2), evaluated inside the 3 sigma
/// ellipse. Gaussians are ordered by camera depth, ties by cloud index.
inline RenderTarget render(const GaussianCloud& cloud, const Camera& cam, const RenderOptions& opts = {},
                           RenderState* state = nullptr) {
  cam.intr.validate();
  const int W = cam.intr.width, H = cam.intr.height;
  const std::size_t npix = static_cast<std::size_t>(W) * H;
  RenderState local;
  RenderState& st = state ? *state : local;
  st = RenderState{};

  std::vector<RenderState::Projection> all(cloud.size());
  std::vector<char> keep(cloud.size(), 0);
  parallel_for(cloud.size(), [&](std::size_t i) {
    all[i].index = static_cast<int>(i);
    keep[i] = project_gaussian(cloud.gaussians[i], cam, opts, &all[i]);
  });
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (keep[i]) st.proj.push_back(all[i]);
  std::sort(st.proj.begin(), st.proj.end(), [](const auto& a, const auto& b) {
    return a.depth < b.depth || (a.depth == b.depth && a.index < b.index);
  });

  st.offsets.assign(npix + 1, 0);
  for (const auto& p : st.proj)
    for (int y = p.y0; y <= p.y1; ++y)
      for (int x = p.x0; x <= p.x1; ++x) ++st.offsets[static_cast<std::size_t>(y) * W + x + 1];
  for (std::size_t i = 0; i < npix; ++i) st.offsets[i + 1] += st.offsets[i];
  st.entries.assign(static_cast<std::size_t>(st.offsets[npix]), 0);
  {
    std::vector<int> fill(st.offsets.begin(), st.offsets.end() - 1);
    for (std::size_t k = 0; k < st.proj.size(); ++k) {
      const auto& p = st.proj[k];
      for (int y = p.y0; y <= p.y1; ++y)
        for (int x = p.x0; x <= p.x1; ++x) st.entries[static_cast<std::size_t>(fill[static_cast<std::size_t>(y) * W + x]++)] = static_cast<int>(k);
    }
  }
  st.a.assign(st.entries.size(), -1.0);
  st.T.assign(st.entries.size(), 1.0);
  st.T_final.assign(npix, 1.0);

  RenderTarget out;
  out.width = W;
  out.height = H;
  out.color = imaging::Image(W, H, 3);
  out.opacity.assign(npix, 0.0);
  out.weight_sum.assign(npix, 0.0);
  const double cutoff2 = opts.cutoff_sigma * opts.cutoff_sigma;
  parallel_for(static_cast<std::size_t>(H), [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < W; ++x) {
      const std::size_t pix = static_cast<std::size_t>(y) * W + x;
      double T = 1.0, wsum = 0.0;
      Vec3 C = Vec3::Zero();
      for (int e = st.offsets[pix]; e < st.offsets[pix + 1]; ++e) {
        const auto& p = st.proj[static_cast<std::size_t>(st.entries[e])];
        const Vec2 d = Vec2(x, y) - p.mean;
        const double q = d.dot(p.conic * d);
        if (q > cutoff2) continue;
        const double a = cloud.gaussians[static_cast<std::size_t>(p.index)].alpha * std::exp(-0.5 * q);
        st.a[e] = a;
        st.T[e] = T;
        C += a * T * cloud.gaussians[static_cast<std::size_t>(p.index)].color;
        wsum += a * T;
        T *= 1.0 - a;
      }
      C += T * cloud.background;
      st.T_final[pix] = T;
      for (int c = 0; c < 3; ++c) out.color.at(x, y, c) = C[c];
      out.opacity[pix] = 1.0 - T;
      out.weight_sum[pix] = wsum;
    }
  });
  return out;
}

/// Gradient of a scalar loss w.r.t. the optimized parameters of one Gaussian:
/// mean, log scales, raw quaternion (w, x, y, z), color, opacity logit.
struct GaussianGrad {
  Vec3 mu = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Eigen::Vector4d rotation = Eigen::Vector4d::Zero();
  Vec3 color = Vec3::Zero();
  double alpha_logit = 0.0;

  GaussianGrad& operator+=(const GaussianGrad& o) {
    mu += o.mu;
    log_scale += o.log_scale;
    rotation += o.rotation;
    color += o.color;
    alpha_logit += o.alpha_logit;
    return *this;
  }
};

namespace detail {

inline constexpr int kBandRows = 8;

struct ScreenGrad {
  Vec2 mean = Vec2::Zero();
  Mat2 conic = Mat2::Zero();
  Vec3 color = Vec3::Zero();
  double alpha = 0.0;
};

// dL/dq for R(q) with q = (w, x, y, z) unit, given G = dL/dR.
inline Eigen::Vector4d quaternion_matrix_grad(const Eigen::Quaterniond& q, const Mat3& G) {
  const double w = q.w(), x = q.x(), y = q.y(), z = q.z();
  Eigen::Vector4d d;
  d(0) = 2 * (-z * G(0, 1) + y * G(0, 2) + z * G(1, 0) - x * G(1, 2) - y * G(2, 0) + x * G(2, 1));
  d(1) = 2 * (y * G(0, 1) + z * G(0, 2) + y * G(1, 0) - 2 * x * G(1, 1) - w * G(1, 2) + z * G(2, 0) + w * G(2, 1) -
              2 * x * G(2, 2));
  d(2) = 2 * (-2 * y * G(0, 0) + x * G(0, 1) + w * G(0, 2) + x * G(1, 0) + z * G(1, 2) - w * G(2, 0) + z * G(2, 1) -
              2 * y * G(2, 2));
  d(3) = 2 * (-2 * z * G(0, 0) - w * G(0, 1) + x * G(0, 2) + w * G(1, 0) - 2 * z * G(1, 1) + y * G(1, 2) +
              x * G(2, 0) + y * G(2, 1));
  return d;
}

}  // namespace detail

/// Backward pass of render(): accumulates dL/dparams for every Gaussian
/// given dL/dC per pixel (3 channels). Row bands of fixed height are reduced
/// in order, so the result does not depend on the thread count.
inline std::vector<GaussianGrad> render_backward(const GaussianCloud& cloud, const Camera& cam, const RenderState& st,
                                                 const imaging::Image& dL_dC) {
  const int W = cam.intr.width, H = cam.intr.height;
  require(dL_dC.width == W && dL_dC.height == H && dL_dC.channels == 3, ErrorCode::InvalidArgument,
          "loss gradient image must match the render");
  const std::size_t np = st.proj.size();
  const int bands = (H + detail::kBandRows - 1) / detail::kBandRows;
  std::vector<std::vector<detail::ScreenGrad>> band_grads(static_cast<std::size_t>(bands));
  parallel_for(static_cast<std::size_t>(bands), [&](std::size_t b) {
    auto& sg = band_grads[b];
    sg.assign(np, {});
    const int y_end = std::min(H, static_cast<int>(b + 1) * detail::kBandRows);
    for (int y = static_cast<int>(b) * detail::kBandRows; y < y_end; ++y)
      for (int x = 0; x < W; ++x) {
        const std::size_t pix = static_cast<std::size_t>(y) * W + x;
        const Vec3 g(dL_dC.at(x, y, 0), dL_dC.at(x, y, 1), dL_dC.at(x, y, 2));
        if (g.isZero(0.0)) continue;
        Vec3 suffix = st.T_final[pix] * cloud.background;
        for (int e = st.offsets[pix + 1] - 1; e >= st.offsets[pix]; --e) {
          const double a = st.a[e];
          if (a < 0.0) continue;
          const auto& p = st.proj[static_cast<std::size_t>(st.entries[e])];
          const Gaussian& G = cloud.gaussians[static_cast<std::size_t>(p.index)];
          const double T = st.T[e];
          auto& out = sg[static_cast<std::size_t>(st.entries[e])];
          out.color += a * T * g;
          const double dL_da = g.dot(T * G.color - suffix / (1.0 - a));
          suffix += a * T * G.color;
          const double gauss = a / G.alpha;
          out.alpha += dL_da * gauss;
          // a = alpha exp(-q/2), q = d^T A d, d = pixel - mean.
          const double dL_dq = -0.5 * a * dL_da;
          const Vec2 d = Vec2(x, y) - p.mean;
          out.mean += dL_dq * (-2.0 * (p.conic * d));
          out.conic += dL_dq * (d * d.transpose());
        }
      }
  });

  std::vector<GaussianGrad> grads(cloud.size());
  const Mat3 Wc = cam.pose.rotation_matrix();
  const double fx = cam.intr.fx, fy = cam.intr.fy;
  parallel_for(np, [&](std::size_t k) {
    detail::ScreenGrad s;
    for (const auto& bg : band_grads) {
      s.mean += bg[k].mean;
      s.conic += bg[k].conic;
      s.color += bg[k].color;
      s.alpha += bg[k].alpha;
    }
    const auto& p = st.proj[k];
    const Gaussian& G = cloud.gaussians[static_cast<std::size_t>(p.index)];
    GaussianGrad& out = grads[static_cast<std::size_t>(p.index)];
    out.color = s.color;
    out.alpha_logit = s.alpha * G.alpha * (1.0 - G.alpha);

    // conic = cov^-1: dL/dcov = -A dL/dA A.
    const Mat2 dcov = -p.conic * s.conic * p.conic;
    const Mat2 dcov_sym = 0.5 * (dcov + dcov.transpose());
    const Mat3 dsigma = p.T.transpose() * dcov_sym * p.T;
    const Mat23 dT = 2.0 * dcov_sym * p.T * p.sigma;
    const Mat23 dJ = dT * Wc.transpose();

    const double x = p.Xc.x(), y = p.Xc.y(), iz = 1.0 / p.Xc.z(), iz2 = iz * iz, iz3 = iz2 * iz;
    Vec3 dXc = p.J.transpose() * s.mean;
    dXc.x() += dJ(0, 2) * (-fx * iz2);
    dXc.y() += dJ(1, 2) * (-fy * iz2);
    dXc.z() += dJ(0, 0) * (-fx * iz2) + dJ(0, 2) * (2 * fx * x * iz3) + dJ(1, 1) * (-fy * iz2) +
               dJ(1, 2) * (2 * fy * y * iz3);
    out.mu = Wc.transpose() * dXc;

    const Mat3 R = G.rotation.toRotationMatrix();
    const Mat3 M = R * G.scale.asDiagonal();
    const Mat3 dsig_sym = 0.5 * (dsigma + dsigma.transpose());
    const Mat3 dM = 2.0 * dsig_sym * M;
    for (int c = 0; c < 3; ++c) out.log_scale(c) = R.col(c).dot(dM.col(c)) * G.scale(c);
    const Mat3 dR = dM * G.scale.asDiagonal();
    const Eigen::Vector4d dq = detail::quaternion_matrix_grad(G.rotation, dR);
    const Eigen::Vector4d qv(G.rotation.w(), G.rotation.x(), G.rotation.y(), G.rotation.z());
    // Stored quaternions are unit; the raw-parameter gradient is the tangential part.
    out.rotation = dq - qv * qv.dot(dq);
  });
  return grads;
}

}  // namespace rigrecon::splat
