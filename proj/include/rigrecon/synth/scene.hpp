#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "rigrecon/geometry/rotation.hpp"
#include "rigrecon/synth/texture.hpp"

namespace rigrecon::synth {

using geometry::Vec2;
using geometry::Vec3;

/// Vehicle frame: X lateral, Y along the direction of travel, Z up. The
/// undercarriage hangs above the cameras, which look along +Z.
struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  Vec3 tint = Vec3::Ones();
};

/// Open cylinder with its axis parallel to Y (pipes, axles).
struct Cylinder {
  double x = 0.0;
  double z = 0.0;
  double radius = 0.03;
  double y0 = 0.0;
  double y1 = 0.0;
  Vec3 tint = Vec3::Ones();
};

struct Hit {
  double t = 0.0;
  Vec3 point = Vec3::Zero();
  int primitive = -1;  // 0: floor pan, 1 + i: box i, 1 + boxes + j: cylinder j
  Vec2 uv = Vec2::Zero();  // texture coordinates in meters
};

/// Floor pan (downward-facing plane at z = pan_z) with boxes and cylinders
/// hanging below it. Albedo is value noise in surface coordinates.
struct Scene {
  double pan_z = 0.30;
  double x_min = -1.0, x_max = 1.0, y_min = -1.0, y_max = 1.0;
  Vec3 pan_tint{0.85, 0.80, 0.75};
  std::vector<Box> boxes;
  std::vector<Cylinder> cylinders;
  std::uint64_t texture_seed = 1;
  double texture_cell = 0.03;  // meters

  std::optional<Hit> raycast(const Vec3& o, const Vec3& d) const {
    constexpr double kEps = 1e-9;
    std::optional<Hit> best;
    auto consider = [&](double t, int prim, const Vec2& uv) {
      if (t > kEps && (!best || t < best->t)) best = Hit{t, o + t * d, prim, uv};
    };
    if (d.z() > 0.0) {
      const double t = (pan_z - o.z()) / d.z();
      const Vec3 p = o + t * d;
      if (p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max) consider(t, 0, {p.x(), p.y()});
    }
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const Box& b = boxes[i];
      double t0 = -1e300, t1 = 1e300;
      int axis = -1;
      bool miss = false;
      for (int k = 0; k < 3 && !miss; ++k) {
        if (std::abs(d[k]) < 1e-15) {
          if (o[k] < b.lo[k] || o[k] > b.hi[k]) miss = true;
          continue;
        }
        double ta = (b.lo[k] - o[k]) / d[k], tb = (b.hi[k] - o[k]) / d[k];
        if (ta > tb) std::swap(ta, tb);
        if (ta > t0) {
          t0 = ta;
          axis = k;
        }
        t1 = std::min(t1, tb);
      }
      if (miss || t0 > t1 || axis < 0) continue;
      const Vec3 p = o + t0 * d;
      const Vec2 uv = axis == 2 ? Vec2(p.x(), p.y()) : axis == 1 ? Vec2(p.x(), p.z()) : Vec2(p.y(), p.z());
      consider(t0, 1 + static_cast<int>(i), uv + Vec2(3.1 * (i + 1), 1.7 * axis));
    }
    for (std::size_t j = 0; j < cylinders.size(); ++j) {
      const Cylinder& c = cylinders[j];
      const double ox = o.x() - c.x, oz = o.z() - c.z;
      const double a = d.x() * d.x() + d.z() * d.z();
      if (a < 1e-15) continue;
      const double b = 2.0 * (ox * d.x() + oz * d.z());
      const double cc = ox * ox + oz * oz - c.radius * c.radius;
      const double disc = b * b - 4 * a * cc;
      if (disc < 0.0) continue;
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}) {
        const Vec3 p = o + t * d;
        if (t > kEps && p.y() >= c.y0 && p.y() <= c.y1) {
          const double ang = std::atan2(p.z() - c.z, p.x() - c.x);
          consider(t, 1 + static_cast<int>(boxes.size() + j), {p.y() + 5.3 * (j + 1), ang * c.radius});
          break;
        }
      }
    }
    return best;
  }

  Vec3 tint(int primitive) const {
    if (primitive <= 0) return pan_tint;
    const auto i = static_cast<std::size_t>(primitive - 1);
    return i < boxes.size() ? boxes[i].tint : cylinders[i - boxes.size()].tint;
  }

  Vec3 albedo(const Hit& h) const {
    const ValueNoise noise(texture_seed + 7919ull * static_cast<std::uint64_t>(h.primitive + 1), texture_cell);
    const double n = noise(h.uv.x(), h.uv.y());
    return tint(h.primitive) * (0.15 + 0.85 * n);
  }

  /// True when nothing blocks the segment from `eye` to `point`.
  bool visible(const Vec3& eye, const Vec3& point, double rel_tol = 1e-6) const {
    const Vec3 d = point - eye;
    const double len = d.norm();
    const auto hit = raycast(eye, d / len);
    return hit && std::abs(hit->t - len) <= rel_tol * len + 1e-9;
  }
};

/// Floor pan with random boxes and pipes spanning y in [y_min, y_max].
inline Scene make_undercarriage(double y_min, double y_max, double height_min, double height_max,
                                std::uint64_t seed) {
  Scene s;
  s.pan_z = height_max;
  s.y_min = y_min;
  s.y_max = y_max;
  s.texture_seed = splitmix64(seed ^ 0x5EED);
  std::mt19937_64 rng(splitmix64(seed));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double length = y_max - y_min;
  const int n_boxes = std::max(1, static_cast<int>(std::round(3.0 * length)));
  const int n_pipes = std::max(1, static_cast<int>(std::round(1.0 * length)));
  for (int i = 0; i < n_boxes; ++i) {
    Box b;
    const double w = 0.08 + 0.25 * u(rng), l = 0.08 + 0.3 * u(rng);
    const double x = -0.7 + 1.4 * u(rng), y = y_min + length * u(rng);
    const double bottom = height_min + (height_max - height_min - 0.03) * u(rng);
    b.lo = Vec3(x - w / 2, y - l / 2, bottom);
    b.hi = Vec3(x + w / 2, y + l / 2, height_max);
    b.tint = Vec3(0.4 + 0.6 * u(rng), 0.4 + 0.6 * u(rng), 0.4 + 0.6 * u(rng));
    s.boxes.push_back(b);
  }
  for (int j = 0; j < n_pipes; ++j) {
    Cylinder c;
    c.radius = 0.02 + 0.03 * u(rng);
    c.x = -0.6 + 1.2 * u(rng);
    c.z = height_min + c.radius + (height_max - height_min - 2 * c.radius) * u(rng);
    const double len = std::min(length, 0.4 + 0.8 * u(rng));
    c.y0 = y_min + (length - len) * u(rng);
    c.y1 = c.y0 + len;
    c.tint = Vec3(0.3 + 0.4 * u(rng), 0.3 + 0.4 * u(rng), 0.3 + 0.4 * u(rng));
    s.cylinders.push_back(c);
  }
  return s;
}

}  // namespace rigrecon::synth
