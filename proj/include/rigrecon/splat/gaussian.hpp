#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/parallel.hpp"
#include "rigrecon/geometry/camera.hpp"
#include "rigrecon/imaging/image.hpp"
#include "rigrecon/sfm/model.hpp"

namespace rigrecon::splat {

using geometry::Mat3;
using geometry::Pose;
using geometry::Vec2;
using geometry::Vec3;

/// Anisotropic 3D Gaussian, Sigma = R S S^T R^T with S = diag(scale).
struct Gaussian {
  Vec3 mu = Vec3::Zero();
  Vec3 scale = Vec3::Constant(0.01);
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 color = Vec3::Constant(0.5);
  double alpha = 0.1;

  Mat3 covariance() const {
    const Mat3 M = rotation.toRotationMatrix() * scale.asDiagonal();
    return M * M.transpose();
  }

  bool is_valid() const {
    return mu.allFinite() && scale.allFinite() && (scale.array() > 0.0).all() && color.allFinite() &&
           alpha > 0.0 && alpha < 1.0 && std::abs(rotation.norm() - 1.0) < 1e-6;
  }
};

struct GaussianCloud {
  std::vector<Gaussian> gaussians;
  Vec3 background = Vec3::Zero();

  std::size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }
};

struct SeedOptions {
  double fallback_scale = 0.01;  // meters, for points without 3 neighbors
  double alpha = 0.1;
  int neighbors = 3;
  double pixel_scale = 1.0;  // image pixels per keypoint pixel, for downsampled images
};

namespace detail {

/// Mean distance to the k nearest other points, by a sweep over points
/// sorted along x. Returns -1 for points with fewer than k others.
inline std::vector<double> mean_knn_distance(const std::vector<Vec3>& pts, int k) {
  const std::size_t n = pts.size();
  std::vector<double> out(n, -1.0);
  if (static_cast<int>(n) <= k) return out;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pts[a].x() < pts[b].x() || (pts[a].x() == pts[b].x() && a < b);
  });
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < n; ++r) rank[order[r]] = r;
  parallel_for(n, [&](std::size_t i) {
    std::vector<double> best;  // ascending squared distances, size <= k
    auto offer = [&](double d2) {
      if (static_cast<int>(best.size()) == k && d2 >= best.back()) return;
      best.insert(std::upper_bound(best.begin(), best.end(), d2), d2);
      if (static_cast<int>(best.size()) > k) best.pop_back();
    };
    auto bound = [&] { return static_cast<int>(best.size()) < k ? std::numeric_limits<double>::infinity() : best.back(); };
    const std::size_t r = rank[i];
    for (std::size_t j = r + 1; j < n; ++j) {
      const double dx = pts[order[j]].x() - pts[i].x();
      if (dx * dx > bound()) break;
      offer((pts[order[j]] - pts[i]).squaredNorm());
    }
    for (std::size_t j = r; j-- > 0;) {
      const double dx = pts[i].x() - pts[order[j]].x();
      if (dx * dx > bound()) break;
      offer((pts[order[j]] - pts[i]).squaredNorm());
    }
    double s = 0.0;
    for (double d2 : best) s += std::sqrt(d2);
    out[i] = s / k;
  });
  return out;
}

}  // namespace detail

/// One isotropic Gaussian per model point. Scale is the mean distance to
/// the three nearest points; color is the mean over observing pixels when
/// `images` (indexed by image id, RGB) are given, else the point color.
inline GaussianCloud seed_gaussians(const sfm::SparseModel& model, const std::vector<imaging::Image>& images = {},
                                    const SeedOptions& opts = {}) {
  if (model.points.empty()) fail(ErrorCode::EmptyModel, "cannot seed Gaussians from a model without points");
  std::vector<Vec3> pts;
  pts.reserve(model.points.size());
  for (const auto& p : model.points) pts.push_back(p.xyz);
  const auto nn = detail::mean_knn_distance(pts, opts.neighbors);
  GaussianCloud cloud;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    Gaussian g;
    g.mu = pts[i];
    g.scale = Vec3::Constant(nn[i] > 0.0 ? nn[i] : opts.fallback_scale);
    g.alpha = opts.alpha;
    g.color = model.points[i].rgb;
    if (!images.empty()) {
      Vec3 sum = Vec3::Zero();
      int count = 0;
      for (const auto& o : model.points[i].obs) {
        if (o.image < 0 || static_cast<std::size_t>(o.image) >= images.size()) continue;
        const auto& img = images[static_cast<std::size_t>(o.image)];
        if (img.empty()) continue;
        const Vec2 uv = (model.observed(o).array() + 0.5) * opts.pixel_scale - 0.5;
        double c[3] = {0.0, 0.0, 0.0};
        if (!imaging::sample_bilinear(img, uv.x(), uv.y(), c)) continue;
        sum += img.channels == 1 ? Vec3::Constant(c[0]) : Vec3(c[0], c[1], c[2]);
        ++count;
      }
      if (count > 0) g.color = sum / count;
    }
    cloud.gaussians.push_back(g);
  }
  return cloud;
}

// Degree-0 spherical-harmonics constant used by splat viewers for f_dc.
inline constexpr double kShC0 = 0.28209479177387814;
inline constexpr int kPlyFloats = 14;

inline std::string ply_header(std::size_t count) {
  std::ostringstream h;
  h << "ply\nformat binary_little_endian 1.0\nelement vertex " << count << "\n";
  for (const char* name : {"x", "y", "z", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
                           "f_dc_0", "f_dc_1", "f_dc_2", "opacity"})
    h << "property float " << name << "\n";
  h << "end_header\n";
  return h.str();
}

/// Binary little-endian PLY: x y z, log scales, quaternion (w x y z),
/// f_dc = (color - 0.5) / C0, opacity logit; all float32.
inline void export_ply(const GaussianCloud& cloud, const std::filesystem::path& path) {
  require(!cloud.empty(), ErrorCode::EmptyModel, "cannot export an empty Gaussian cloud");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  const std::string header = ply_header(cloud.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const Gaussian& g : cloud.gaussians) {
    const double a = std::clamp(g.alpha, 1e-7, 1.0 - 1e-7);
    const float v[kPlyFloats] = {static_cast<float>(g.mu.x()),
                                 static_cast<float>(g.mu.y()),
                                 static_cast<float>(g.mu.z()),
                                 static_cast<float>(std::log(g.scale.x())),
                                 static_cast<float>(std::log(g.scale.y())),
                                 static_cast<float>(std::log(g.scale.z())),
                                 static_cast<float>(g.rotation.w()),
                                 static_cast<float>(g.rotation.x()),
                                 static_cast<float>(g.rotation.y()),
                                 static_cast<float>(g.rotation.z()),
                                 static_cast<float>((g.color.x() - 0.5) / kShC0),
                                 static_cast<float>((g.color.y() - 0.5) / kShC0),
                                 static_cast<float>((g.color.z() - 0.5) / kShC0),
                                 static_cast<float>(std::log(a / (1.0 - a)))};
    static_assert(sizeof(float) == 4);
    char bytes[sizeof(v)];
    std::memcpy(bytes, v, sizeof(v));
    if constexpr (std::endian::native == std::endian::big)
      for (std::size_t k = 0; k < sizeof(v); k += 4) std::reverse(bytes + k, bytes + k + 4);
    out.write(bytes, sizeof(bytes));
  }
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

/// Reads files written by export_ply (properties must appear in that order).
inline GaussianCloud import_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  std::string line;
  std::size_t count = 0;
  std::vector<std::string> props;
  bool binary_le = false;
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (word == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex") fail(ErrorCode::ParseError, "unexpected PLY element " + name);
    } else if (word == "property") {
      std::string type, name;
      ls >> type >> name;
      if (type != "float") fail(ErrorCode::ParseError, "PLY property " + name + " is not float");
      props.push_back(name);
    }
  }
  if (!binary_le) fail(ErrorCode::ParseError, "PLY is not binary little endian");
  const std::vector<std::string> expected = {"x",     "y",     "z",     "scale_0", "scale_1", "scale_2", "rot_0",
                                             "rot_1", "rot_2", "rot_3", "f_dc_0",  "f_dc_1",  "f_dc_2",  "opacity"};
  if (props != expected) fail(ErrorCode::ParseError, "PLY vertex layout differs from the splat layout");
  GaussianCloud cloud;
  cloud.gaussians.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char bytes[kPlyFloats * 4];
    if (!in.read(bytes, sizeof(bytes))) fail(ErrorCode::ParseError, "PLY ends before vertex " + std::to_string(i));
    if constexpr (std::endian::native == std::endian::big)
      for (std::size_t k = 0; k < sizeof(bytes); k += 4) std::reverse(bytes + k, bytes + k + 4);
    float v[kPlyFloats];
    std::memcpy(v, bytes, sizeof(v));
    Gaussian g;
    g.mu = Vec3(v[0], v[1], v[2]);
    g.scale = Vec3(std::exp(double(v[3])), std::exp(double(v[4])), std::exp(double(v[5])));
    g.rotation = Eigen::Quaterniond(v[6], v[7], v[8], v[9]).normalized();
    g.color = Vec3(0.5 + kShC0 * v[10], 0.5 + kShC0 * v[11], 0.5 + kShC0 * v[12]);
    g.alpha = 1.0 / (1.0 + std::exp(-double(v[13])));
    cloud.gaussians.push_back(g);
  }
  return cloud;
}

}  // namespace rigrecon::splat
