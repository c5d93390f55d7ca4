#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/json_io.hpp"
#include "rigrecon/core/types.hpp"
#include "rigrecon/geometry/camera.hpp"
#include "rigrecon/matching/pairs.hpp"
#include "rigrecon/matching/tracks.hpp"

namespace rigrecon::sfm {

using geometry::Mat2;
using geometry::Mat3;
using geometry::Pose;
using geometry::Vec2;
using geometry::Vec3;
using matching::Observation;

struct ModelImage {
  std::string name;
  CameraId camera = CameraId::C;
  int triplet = 0;
  Pose pose;
  bool registered = false;
};

struct ModelPoint {
  Vec3 xyz = Vec3::Zero();
  Vec3 rgb = Vec3::Constant(0.5);
  int track = -1;
  std::vector<Observation> obs;
};

struct ModelStats {
  int registered_images = 0;
  int num_points = 0;
  double mean_track_length = 0.0;
  double mean_reprojection_error_px = 0.0;
};

/// Images are indexed by dense id (ImageKey::id()); intrinsics are the
/// rectified pinhole models of L, C, R.
struct SparseModel {
  std::array<geometry::CameraIntrinsics, 3> intr;
  std::vector<ModelImage> images;
  std::vector<std::vector<matching::Keypoint>> keypoints;
  std::vector<ModelPoint> points;
  ModelStats stats;

  const geometry::CameraIntrinsics& intrinsics(int image) const {
    return intr[static_cast<std::size_t>(index_of(images[static_cast<std::size_t>(image)].camera))];
  }
  Vec2 observed(const Observation& o) const {
    const auto& k = keypoints[static_cast<std::size_t>(o.image)][static_cast<std::size_t>(o.keypoint)];
    return {k.u, k.v};
  }
  const Pose& pose(int image) const { return images[static_cast<std::size_t>(image)].pose; }
  bool registered(int image) const { return images[static_cast<std::size_t>(image)].registered; }
  int num_registered() const {
    int n = 0;
    for (const auto& im : images) n += im.registered;
    return n;
  }
};

/// Empty model with one unregistered image per keypoint list.
inline SparseModel make_model(const std::vector<std::vector<matching::Keypoint>>& keypoints,
                              const std::vector<std::string>& names,
                              const std::array<geometry::CameraIntrinsics, 3>& intr) {
  require(names.size() == keypoints.size(), ErrorCode::InvalidArgument, "one name per image required");
  SparseModel m;
  m.intr = intr;
  m.keypoints = keypoints;
  for (std::size_t id = 0; id < names.size(); ++id) {
    const auto key = matching::ImageKey::from_id(static_cast<int>(id));
    m.images.push_back({names[id], key.camera, key.index, Pose::identity(), false});
  }
  return m;
}

/// Pixel residual norm of one observation; infinity behind the camera.
inline double reprojection_error(const SparseModel& m, const Vec3& X, const Observation& o) {
  const Vec3 Xc = m.pose(o.image).apply(X);
  if (!(Xc.z() > geometry::kMinDepth)) return std::numeric_limits<double>::infinity();
  const Vec2 p = m.intrinsics(o.image).to_pixel({Xc.x() / Xc.z(), Xc.y() / Xc.z()});
  return (p - m.observed(o)).norm();
}

/// The four summary metrics, recomputed from poses, points and keypoints.
inline ModelStats model_stats(const SparseModel& m) {
  ModelStats s;
  s.registered_images = m.num_registered();
  s.num_points = static_cast<int>(m.points.size());
  double err = 0.0;
  long obs = 0;
  for (const ModelPoint& p : m.points)
    for (const Observation& o : p.obs) {
      if (!m.registered(o.image)) continue;
      err += reprojection_error(m, p.xyz, o);
      ++obs;
    }
  s.mean_track_length = m.points.empty() ? 0.0 : static_cast<double>(obs) / static_cast<double>(m.points.size());
  s.mean_reprojection_error_px = obs == 0 ? 0.0 : err / static_cast<double>(obs);
  return s;
}

inline bool stats_equal(const ModelStats& a, const ModelStats& b, double tol = 1e-9) {
  return a.registered_images == b.registered_images && a.num_points == b.num_points &&
         std::abs(a.mean_track_length - b.mean_track_length) <= tol &&
         std::abs(a.mean_reprojection_error_px - b.mean_reprojection_error_px) <= tol;
}

/// Asserted invariant: every point has two or more observations, all from
/// registered images and distinct images.
inline void check_model(const SparseModel& m) {
  for (const ModelPoint& p : m.points) {
    require(p.obs.size() >= 2, ErrorCode::StageFailed, "model point with fewer than two observations");
    for (std::size_t i = 0; i < p.obs.size(); ++i) {
      require(m.registered(p.obs[i].image), ErrorCode::StageFailed, "observation from an unregistered image");
      for (std::size_t j = 0; j < i; ++j)
        require(p.obs[i].image != p.obs[j].image, ErrorCode::StageFailed, "point observed twice in one image");
    }
  }
}

inline Json stats_to_json(const ModelStats& s) {
  return Json{{"registered_images", s.registered_images},
              {"num_points", s.num_points},
              {"mean_track_length", s.mean_track_length},
              {"mean_reprojection_error_px", s.mean_reprojection_error_px}};
}

inline ModelStats stats_from_json(const Json& j) {
  ModelStats s;
  s.registered_images = json_get<int>(j, "registered_images");
  s.num_points = json_get<int>(j, "num_points");
  s.mean_track_length = json_get<double>(j, "mean_track_length");
  s.mean_reprojection_error_px = json_get<double>(j, "mean_reprojection_error_px");
  return s;
}

/// {cameras, images, points, stats}. Keypoints travel with their images so
/// the stats can be recomputed from the document alone.
inline Json model_to_json(const SparseModel& m) {
  Json cams = Json::array();
  for (const auto& k : m.intr) cams.push_back(geometry::camera_model_to_json({k, {}}));
  std::vector<Json> img_obs(m.images.size(), Json::array());
  for (std::size_t p = 0; p < m.points.size(); ++p)
    for (const Observation& o : m.points[p].obs) img_obs[static_cast<std::size_t>(o.image)].push_back({o.keypoint, p});
  Json images = Json::array();
  for (std::size_t id = 0; id < m.images.size(); ++id) {
    const ModelImage& im = m.images[id];
    Json j = geometry::pose_to_json(im.pose);
    j["name"] = im.name;
    j["camera_id"] = std::string(to_string(im.camera));
    j["triplet"] = im.triplet;
    j["registered"] = im.registered;
    Json kps = Json::array();
    for (const auto& k : m.keypoints[id]) kps.push_back({k.u, k.v, k.score});
    j["keypoints"] = std::move(kps);
    j["observations"] = std::move(img_obs[id]);
    images.push_back(std::move(j));
  }
  Json points = Json::array();
  for (const ModelPoint& p : m.points) {
    Json obs = Json::array();
    for (const Observation& o : p.obs) obs.push_back({o.image, o.keypoint});
    points.push_back(Json{{"xyz", {p.xyz.x(), p.xyz.y(), p.xyz.z()}},
                          {"rgb", {p.rgb.x(), p.rgb.y(), p.rgb.z()}},
                          {"track", p.track},
                          {"observations", std::move(obs)}});
  }
  return Json{{"cameras", cams}, {"images", images}, {"points", points}, {"stats", stats_to_json(m.stats)}};
}

inline SparseModel model_from_json(const Json& j) {
  SparseModel m;
  const Json& cams = json_get<Json>(j, "cameras");
  require(cams.size() == 3, ErrorCode::ParseError, "model needs three cameras");
  for (std::size_t c = 0; c < 3; ++c) m.intr[c] = geometry::camera_model_from_json(cams[c]).intr;
  for (const Json& ij : json_get<Json>(j, "images")) {
    ModelImage im;
    im.name = json_get<std::string>(ij, "name");
    im.camera = parse_camera_id(json_get<std::string>(ij, "camera_id"));
    im.triplet = json_get<int>(ij, "triplet");
    im.registered = json_get<bool>(ij, "registered");
    im.pose = geometry::pose_from_json(ij);
    std::vector<matching::Keypoint> kps;
    for (const Json& k : json_get<Json>(ij, "keypoints")) kps.push_back({k[0].get<double>(), k[1].get<double>(), k[2].get<double>()});
    m.images.push_back(std::move(im));
    m.keypoints.push_back(std::move(kps));
  }
  const int n_images = static_cast<int>(m.images.size());
  for (const Json& pj : json_get<Json>(j, "points")) {
    ModelPoint p;
    const auto xyz = json_get<std::vector<double>>(pj, "xyz");
    const auto rgb = json_get<std::vector<double>>(pj, "rgb");
    require(xyz.size() == 3 && rgb.size() == 3, ErrorCode::ParseError, "points need xyz and rgb triples");
    p.xyz = Vec3(xyz[0], xyz[1], xyz[2]);
    p.rgb = Vec3(rgb[0], rgb[1], rgb[2]);
    p.track = json_get<int>(pj, "track");
    for (const Json& o : json_get<Json>(pj, "observations")) {
      const Observation ob{o[0].get<int>(), o[1].get<int>()};
      require(ob.image >= 0 && ob.image < n_images && ob.keypoint >= 0 &&
                  ob.keypoint < static_cast<int>(m.keypoints[static_cast<std::size_t>(ob.image)].size()),
              ErrorCode::IndexOutOfRange, "point observation outside the image keypoints");
      p.obs.push_back(ob);
    }
    m.points.push_back(std::move(p));
  }
  m.stats = stats_from_json(json_get<Json>(j, "stats"));
  return m;
}

/// Binary little-endian PLY of the sparse points (x, y, z float; red, green, blue uchar).
inline void write_points_ply(const SparseModel& m, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + path.string());
  out << "ply\nformat binary_little_endian 1.0\nelement vertex " << m.points.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (const ModelPoint& p : m.points) {
    const float xyz[3] = {static_cast<float>(p.xyz.x()), static_cast<float>(p.xyz.y()), static_cast<float>(p.xyz.z())};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    for (int c = 0; c < 3; ++c) {
      const auto v = static_cast<std::uint8_t>(std::lround(std::clamp(p.rgb[c], 0.0, 1.0) * 255.0));
      out.put(static_cast<char>(v));
    }
  }
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

}  // namespace rigrecon::sfm
