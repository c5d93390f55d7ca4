#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <tuple>
#include <utility>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "rigrecon/imaging/image.hpp"

namespace rigrecon::imaging {

namespace detail {

// FFTW planning mutates global planner state; execution on distinct buffers
// is thread safe.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

class Fft2d {
 public:
  Fft2d(int rows, int cols, int sign) : rows_(rows), cols_(cols) {
    buffer_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * rows * cols));
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan_ = fftw_plan_dft_2d(rows, cols, buffer_, buffer_, sign, FFTW_ESTIMATE);
  }
  ~Fft2d() {
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(buffer_);
  }
  Fft2d(const Fft2d&) = delete;
  Fft2d& operator=(const Fft2d&) = delete;

  fftw_complex* data() { return buffer_; }
  void execute() { fftw_execute(plan_); }

 private:
  int rows_, cols_;
  fftw_complex* buffer_ = nullptr;
  fftw_plan plan_ = nullptr;
};

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

inline double hann(int n, int count) {
  if (count <= 1) return 1.0;
  return 0.5 * (1.0 - std::cos(2.0 * 3.14159265358979323846 * n / (count - 1)));
}

inline bool has_variance(const Image& img) {
  if (img.data.empty()) return false;
  const double first = img.data.front();
  for (double v : img.data)
    if (v != first) return true;
  return false;
}

// Mean-removed, Hann-windowed copy of `img` placed in a zero-padded buffer.
inline void load_windowed(const Image& img, int rows, int cols, fftw_complex* dst) {
  const double mean = img.mean();
  for (int i = 0; i < rows * cols; ++i) dst[i][0] = dst[i][1] = 0.0;
  for (int y = 0; y < img.height; ++y) {
    const double wy = hann(y, img.height);
    for (int x = 0; x < img.width; ++x)
      dst[y * cols + x][0] = (img.at(x, y) - mean) * wy * hann(x, img.width);
  }
}

struct Surface {
  int rows = 0, cols = 0;
  std::vector<double> values;

  double operator()(int y, int x) const {
    y = ((y % rows) + rows) % rows;
    x = ((x % cols) + cols) % cols;
    return values[static_cast<std::size_t>(y) * cols + x];
  }
};

inline Surface correlation_surface(const Image& a, const Image& b) {
  Surface s;
  s.rows = next_pow2(a.height);
  s.cols = next_pow2(a.width);
  const int n = s.rows * s.cols;
  Fft2d fa(s.rows, s.cols, FFTW_FORWARD);
  Fft2d fb(s.rows, s.cols, FFTW_FORWARD);
  load_windowed(a, s.rows, s.cols, fa.data());
  load_windowed(b, s.rows, s.cols, fb.data());
  fa.execute();
  fb.execute();

  double max_mag = 0.0;
  std::vector<std::complex<double>> cross(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::complex<double> A(fa.data()[i][0], fa.data()[i][1]);
    const std::complex<double> B(fb.data()[i][0], fb.data()[i][1]);
    cross[i] = B * std::conj(A);
    max_mag = std::max(max_mag, std::abs(cross[i]));
  }
  if (!(max_mag > 0.0)) fail(ErrorCode::DegenerateSpectrum, "empty cross-power spectrum");
  const double floor_mag = max_mag * 1e-12;
  Fft2d inv(s.rows, s.cols, FFTW_BACKWARD);
  for (int i = 0; i < n; ++i) {
    const double m = std::abs(cross[i]);
    const std::complex<double> r = m > floor_mag ? cross[i] / m : std::complex<double>(0.0, 0.0);
    inv.data()[i][0] = r.real();
    inv.data()[i][1] = r.imag();
  }
  inv.execute();
  s.values.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) s.values[i] = inv.data()[i][0] / n;
  return s;
}

// Signed integer location of the surface maximum (first in scan order on ties).
inline std::pair<int, int> surface_peak(const Surface& s, double* value) {
  int py = 0, px = 0;
  double best = -1e300;
  for (int y = 0; y < s.rows; ++y)
    for (int x = 0; x < s.cols; ++x)
      if (s(y, x) > best) {
        best = s(y, x);
        py = y;
        px = x;
      }
  if (value) *value = best;
  return {py > s.rows / 2 ? py - s.rows : py, px > s.cols / 2 ? px - s.cols : px};
}

inline double parabola_offset(double lo, double mid, double hi) {
  const double denom = lo - 2.0 * mid + hi;
  if (!(std::abs(denom) > 0.0)) return 0.0;
  return std::clamp(0.5 * (lo - hi) / denom, -0.5, 0.5);
}

inline Image roll(const Image& img, int dy, int dx) {
  Image out(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y) {
    const int sy = ((y + dy) % img.height + img.height) % img.height;
    for (int x = 0; x < img.width; ++x) out.at(x, y) = img.at(((x + dx) % img.width + img.width) % img.width, sy);
  }
  return out;
}

}  // namespace detail

/// Translation between two frames from the normalized cross-power spectrum.
struct PhaseShift {
  double dx = 0.0;
  double dy = 0.0;
  int peak_x = 0;
  int peak_y = 0;
  double peak_value = 0.0;
};

/// Full 2D phase correlation; (dx, dy) is the motion that carries `a` onto `b`
/// (b(x, y) ~ a(x - dx, y - dy)).
///
/// The integer peak comes from the first surface. For the sub-pixel part `b`
/// is rolled back by that peak and the 3-point parabola is fitted around the
/// origin of the second surface; the window attenuates the wrapped rows, and
/// the fit no longer sees the overlap asymmetry a large shift puts into the
/// windowed pair.
inline PhaseShift phase_correlate(const Image& a_in, const Image& b_in) {
  const Image a = to_gray(a_in);
  const Image b = to_gray(b_in);
  require(a.width == b.width && a.height == b.height, ErrorCode::InvalidArgument,
          "phase correlation needs equally sized frames");
  require(!a.empty(), ErrorCode::EmptyImage, "phase correlation of an empty frame");
  if (!detail::has_variance(a) || !detail::has_variance(b))
    fail(ErrorCode::DegenerateSpectrum, "frame has zero variance");

  PhaseShift out;
  const detail::Surface first = detail::correlation_surface(a, b);
  std::tie(out.peak_y, out.peak_x) = detail::surface_peak(first, &out.peak_value);

  const detail::Surface* fit = &first;
  int cy = out.peak_y, cx = out.peak_x;
  detail::Surface second;
  if (cy != 0 || cx != 0) {
    second = detail::correlation_surface(a, detail::roll(b, cy, cx));
    if (detail::surface_peak(second, nullptr) == std::make_pair(0, 0)) {
      fit = &second;
      cy = cx = 0;
    }
  }
  const detail::Surface& s = *fit;
  out.dy = out.peak_y + detail::parabola_offset(s(cy - 1, cx), s(cy, cx), s(cy + 1, cx));
  out.dx = out.peak_x + detail::parabola_offset(s(cy, cx - 1), s(cy, cx), s(cy, cx + 1));
  return out;
}

/// Signed vertical displacement in rows (positive: content moved down from a to b).
inline double phase_correlate_vertical(const Image& a, const Image& b) { return phase_correlate(a, b).dy; }

}  // namespace rigrecon::imaging
