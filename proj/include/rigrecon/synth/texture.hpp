#pragma once

#include <cmath>
#include <cstdint>

#include "rigrecon/core/random.hpp"

namespace rigrecon::synth {

/// Procedural value noise on the plane: three octaves of a hashed lattice,
/// smoothstep-interpolated. Band-limited by construction and defined
/// everywhere, so any crop has a non-degenerate spectrum. Output in [0, 1].
class ValueNoise {
 public:
  ValueNoise(std::uint64_t seed, double cell) : seed_(seed), cell_(cell) {}

  double operator()(double x, double y) const {
    double sum = 0.0, amp = 1.0, total = 0.0, cell = cell_;
    for (int octave = 0; octave < 3; ++octave) {
      sum += amp * lattice(x / cell, y / cell, octave);
      total += amp;
      amp *= 0.5;
      cell *= 0.5;
    }
    return sum / total;
  }

 private:
  double node(std::int64_t i, std::int64_t j, int octave) const {
    std::uint64_t h = splitmix64(seed_ ^ (static_cast<std::uint64_t>(octave) << 56));
    h = splitmix64(h ^ static_cast<std::uint64_t>(i));
    h = splitmix64(h ^ static_cast<std::uint64_t>(j));
    return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
  }

  double lattice(double gx, double gy, int octave) const {
    const double fx = std::floor(gx), fy = std::floor(gy);
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
    auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
    const double tx = smooth(gx - fx), ty = smooth(gy - fy);
    const double top = (1 - tx) * node(ix, iy, octave) + tx * node(ix + 1, iy, octave);
    const double bot = (1 - tx) * node(ix, iy + 1, octave) + tx * node(ix + 1, iy + 1, octave);
    return (1 - ty) * top + ty * bot;
  }

  std::uint64_t seed_;
  double cell_;
};

}  // namespace rigrecon::synth
