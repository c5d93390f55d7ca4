#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "rigrecon/imaging/image.hpp"

namespace rigrecon::imaging {

/// 4-neighbour Laplacian [[0,1,0],[1,-4,1],[0,1,0]] with replicated borders.
/// Color input is converted to luma first.
inline Image laplacian(const Image& input) {
  const Image img = to_gray(input);
  Image out(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(x, y) = img.clamped(x - 1, y) + img.clamped(x + 1, y) + img.clamped(x, y - 1) +
                     img.clamped(x, y + 1) - 4.0 * img.at(x, y);
  return out;
}

struct SharpnessScore {
  double value = 0.0;
};

/// Population variance of the Laplacian response.
inline SharpnessScore laplacian_variance(const Image& img) {
  require(!img.empty(), ErrorCode::EmptyImage, "laplacian_variance of an empty image");
  const Image lap = laplacian(img);
  const double n = static_cast<double>(lap.data.size());
  double mean = 0.0;
  for (double v : lap.data) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : lap.data) var += (v - mean) * (v - mean);
  return {std::max(0.0, var / n)};
}

/// Normalized 1D Gaussian taps, radius ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Separable Gaussian blur with replicated borders; sigma = 0 is the identity.
inline Image gaussian_blur(const Image& img, double sigma) {
  require(sigma >= 0.0, ErrorCode::InvalidArgument, "gaussian_blur needs sigma >= 0");
  if (sigma == 0.0 || img.empty()) return img;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  Image tmp(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * img.clamped(x + i, y, c);
        tmp.at(x, y, c) = s;
      }
  Image out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double s = 0.0;
        for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.clamped(x, y + i, c);
        out.at(x, y, c) = s;
      }
  return out;
}

/// Contrast-limited adaptive histogram equalization on a gray image.
///
/// The image is split into tiles x tiles regions. Each region gets a 256-bin
/// histogram clipped at clip_limit times the mean bin height; the clipped
/// excess is spread uniformly over all bins and the normalized CDF becomes the
/// region's tone map. Pixels blend the maps of the four nearest region
/// centers bilinearly.
inline Image clahe(const Image& input, int tiles, double clip_limit) {
  require(tiles >= 1, ErrorCode::InvalidArgument, "clahe needs tile >= 1");
  const Image img = to_gray(input);
  if (img.empty()) return img;
  const int tx = std::min(tiles, img.width);
  const int ty = std::min(tiles, img.height);
  auto bin_of = [](double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); };
  auto x_edge = [&](int i) { return static_cast<int>(static_cast<long>(i) * img.width / tx); };
  auto y_edge = [&](int j) { return static_cast<int>(static_cast<long>(j) * img.height / ty); };

  std::vector<std::array<double, 256>> luts(static_cast<std::size_t>(tx) * ty);
  for (int j = 0; j < ty; ++j) {
    for (int i = 0; i < tx; ++i) {
      std::array<double, 256> hist{};
      const int x0 = x_edge(i), x1 = x_edge(i + 1), y0 = y_edge(j), y1 = y_edge(j + 1);
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) hist[bin_of(img.at(x, y))] += 1.0;
      const double total = static_cast<double>(x1 - x0) * (y1 - y0);
      if (clip_limit > 0.0) {
        const double limit = std::max(1.0, clip_limit * total / 256.0);
        double excess = 0.0;
        for (double& h : hist) {
          if (h > limit) {
            excess += h - limit;
            h = limit;
          }
        }
        for (double& h : hist) h += excess / 256.0;
      }
      auto& lut = luts[static_cast<std::size_t>(j) * tx + i];
      double cdf = 0.0;
      for (int b = 0; b < 256; ++b) {
        cdf += hist[b];
        lut[b] = std::clamp(cdf / total, 0.0, 1.0);
      }
    }
  }

  auto center_x = [&](int i) { return 0.5 * (x_edge(i) + x_edge(i + 1) - 1); };
  auto center_y = [&](int j) { return 0.5 * (y_edge(j) + y_edge(j + 1) - 1); };
  // Lower neighbouring tile index and blend weight toward the upper one.
  auto locate = [](double pos, int count, auto center) {
    if (count == 1 || pos <= center(0)) return std::pair<int, double>{0, 0.0};
    if (pos >= center(count - 1)) return std::pair<int, double>{count - 1, 0.0};
    int lo = 0;
    while (lo + 1 < count && center(lo + 1) <= pos) ++lo;
    const double w = (pos - center(lo)) / (center(lo + 1) - center(lo));
    return std::pair<int, double>{lo, w};
  };

  Image out(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y) {
    const auto [j0, wy] = locate(y, ty, center_y);
    const int j1 = std::min(j0 + 1, ty - 1);
    for (int x = 0; x < img.width; ++x) {
      const auto [i0, wx] = locate(x, tx, center_x);
      const int i1 = std::min(i0 + 1, tx - 1);
      const int b = bin_of(img.at(x, y));
      const double v00 = luts[static_cast<std::size_t>(j0) * tx + i0][b];
      const double v10 = luts[static_cast<std::size_t>(j0) * tx + i1][b];
      const double v01 = luts[static_cast<std::size_t>(j1) * tx + i0][b];
      const double v11 = luts[static_cast<std::size_t>(j1) * tx + i1][b];
      out.at(x, y) = (1 - wy) * ((1 - wx) * v00 + wx * v10) + wy * ((1 - wx) * v01 + wx * v11);
    }
  }
  return out;
}

}  // namespace rigrecon::imaging
