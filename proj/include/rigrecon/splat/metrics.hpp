#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/imaging/image.hpp"

namespace rigrecon::splat {

/// 10 log10(1 / MSE) for images in [0, 1]; identical images give +infinity.
inline double psnr(const imaging::Image& a, const imaging::Image& b) {
  require(a.same_shape(b) && !a.empty(), ErrorCode::InvalidArgument, "psnr needs two images of equal shape");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) mse += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  mse /= static_cast<double>(a.data.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

namespace detail {

inline const std::array<double, kSsimWindow>& ssim_kernel() {
  static const std::array<double, kSsimWindow> k = [] {
    std::array<double, kSsimWindow> w{};
    double s = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
      const double d = i - kSsimWindow / 2;
      w[i] = std::exp(-d * d / (2 * kSsimSigma * kSsimSigma));
      s += w[i];
    }
    for (double& v : w) v /= s;
    return w;
  }();
  return k;
}

// Separable Gaussian filter over window positions that fit entirely inside
// the w x h plane; output is (w - 10) x (h - 10).
inline std::vector<double> filter_valid(const std::vector<double>& in, int w, int h) {
  const auto& k = ssim_kernel();
  const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h), out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * in[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

// Adjoint of filter_valid: spreads a (w - 10) x (h - 10) map back onto w x h.
inline std::vector<double> filter_valid_adjoint(const std::vector<double>& in, int w, int h) {
  const auto& k = ssim_kernel();
  const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(ow) * h, 0.0), out(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      for (int i = 0; i < kSsimWindow; ++i)
        tmp[static_cast<std::size_t>(y + i) * ow + x] += k[i] * in[static_cast<std::size_t>(y) * ow + x];
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x)
      for (int i = 0; i < kSsimWindow; ++i)
        out[static_cast<std::size_t>(y) * w + x + i] += k[i] * tmp[static_cast<std::size_t>(y) * ow + x];
  return out;
}

inline std::vector<double> channel(const imaging::Image& img, int c) {
  std::vector<double> out(img.pixel_count());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = img.data[i * img.channels + c];
  return out;
}

}  // namespace detail

/// Mean SSIM over all full 11x11 Gaussian windows (sigma 1.5) and channels.
/// With `grad_a`, also returns d SSIM / d a.
inline double ssim(const imaging::Image& a, const imaging::Image& b, imaging::Image* grad_a = nullptr) {
  require(a.same_shape(b) && !a.empty(), ErrorCode::InvalidArgument, "ssim needs two images of equal shape");
  require(a.width >= kSsimWindow && a.height >= kSsimWindow, ErrorCode::InvalidArgument,
          "ssim needs images of at least 11 x 11 pixels");
  const int w = a.width, h = a.height;
  const std::size_t npos = static_cast<std::size_t>(w - kSsimWindow + 1) * (h - kSsimWindow + 1);
  if (grad_a) *grad_a = imaging::Image(w, h, a.channels);
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    const auto x = detail::channel(a, c), y = detail::channel(b, c);
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::filter_valid(x, w, h), my = detail::filter_valid(y, w, h);
    const auto exx = detail::filter_valid(xx, w, h), eyy = detail::filter_valid(yy, w, h),
               exy = detail::filter_valid(xy, w, h);
    std::vector<double> d_mx(npos), d_exx(npos), d_exy(npos);
    for (std::size_t p = 0; p < npos; ++p) {
      const double sx = exx[p] - mx[p] * mx[p], sy = eyy[p] - my[p] * my[p], sxy = exy[p] - mx[p] * my[p];
      const double A1 = 2 * mx[p] * my[p] + kSsimC1, A2 = 2 * sxy + kSsimC2;
      const double B1 = mx[p] * mx[p] + my[p] * my[p] + kSsimC1, B2 = sx + sy + kSsimC2;
      const double s = A1 * A2 / (B1 * B2);
      total += s;
      if (!grad_a) continue;
      d_mx[p] = (2 * my[p] * A2 - 2 * my[p] * A1) / (B1 * B2) - s * (2 * mx[p] / B1 - 2 * mx[p] / B2);
      d_exx[p] = -s / B2;
      d_exy[p] = 2 * A1 / (B1 * B2);
    }
    if (!grad_a) continue;
    const auto g_mx = detail::filter_valid_adjoint(d_mx, w, h);
    const auto g_exx = detail::filter_valid_adjoint(d_exx, w, h);
    const auto g_exy = detail::filter_valid_adjoint(d_exy, w, h);
    for (std::size_t i = 0; i < x.size(); ++i)
      grad_a->data[i * a.channels + c] = g_mx[i] + 2 * x[i] * g_exx[i] + y[i] * g_exy[i];
  }
  const double norm = 1.0 / (static_cast<double>(npos) * a.channels);
  if (grad_a)
    for (double& v : grad_a->data) v *= norm;
  return total * norm;
}

// Residuals this small are rounding noise; the L1 subgradient there is 0.
inline constexpr double kL1DeadZone = 1e-12;

/// (1 - lambda) mean|a - b| + lambda (1 - SSIM(a, b)), with d loss / d a.
inline double photometric_loss(const imaging::Image& render, const imaging::Image& target, double lambda,
                               imaging::Image* grad = nullptr) {
  require(render.same_shape(target), ErrorCode::InvalidArgument, "loss needs images of equal shape");
  const double n = static_cast<double>(render.data.size());
  double l1 = 0.0;
  for (std::size_t i = 0; i < render.data.size(); ++i) l1 += std::abs(render.data[i] - target.data[i]);
  l1 /= n;
  imaging::Image g_ssim;
  const double s = ssim(render, target, grad ? &g_ssim : nullptr);
  if (grad) {
    *grad = imaging::Image(render.width, render.height, render.channels);
    for (std::size_t i = 0; i < render.data.size(); ++i) {
      const double r = render.data[i] - target.data[i];
      const double sign = r > kL1DeadZone ? 1.0 : (r < -kL1DeadZone ? -1.0 : 0.0);
      grad->data[i] = (1.0 - lambda) * sign / n - lambda * g_ssim.data[i];
    }
  }
  return (1.0 - lambda) * l1 + lambda * (1.0 - s);
}

}  // namespace rigrecon::splat
