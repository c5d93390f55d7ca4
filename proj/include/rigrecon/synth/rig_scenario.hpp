#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/json_io.hpp"
#include "rigrecon/core/random.hpp"
#include "rigrecon/core/types.hpp"
#include "rigrecon/geometry/camera.hpp"
#include "rigrecon/geometry/pose.hpp"
#include "rigrecon/matching/matches.hpp"
#include "rigrecon/matching/tracks.hpp"
#include "rigrecon/synth/camera_presets.hpp"
#include "rigrecon/synth/scene.hpp"

namespace rigrecon::synth {

/// Three upward-looking cameras on a rigid bar, the vehicle driving over them.
/// Expressed in the vehicle frame the rig translates along +Y.
struct RigScenario {
  std::array<geometry::CameraModel, 3> cameras{rig_camera(), rig_camera(), rig_camera()};
  Vec3 t_lc{-0.31, 0.0, 0.0};  // L center in the C camera frame
  Vec3 t_cr{0.31, 0.0, 0.0};   // R center in the C camera frame
  double speed_mps = 1.2;
  double fps = 120.0;
  int frames_per_triplet = 3;  // selected triplets are this many frames apart
  double height_min = 0.12;
  double height_max = 0.30;
  double rotation_jitter_deg = 0.5;
  double lateral_jitter_m = 0.005;
  int num_points = 3000;
  double pixel_noise = 0.0;  // RMS of the 2D observation error, pixels
  double outlier_rate = 0.0;
  int track_lifetime = 0;  // triplets a point stays detectable around where it was seeded; 0 = unlimited
  std::array<int, 2> sync_offsets{0, 0};  // L, R relative to C

  double triplet_spacing() const { return speed_mps / fps * frames_per_triplet; }

  void validate() const {
    require(fps > 0.0, ErrorCode::ConfigInvalid, "fps must be positive");
    require(height_min >= 0.05 && height_max <= 1.0 && height_min < height_max, ErrorCode::ConfigInvalid,
            "underbody height range must lie within [0.05, 1.0] m");
    require(std::abs(sync_offsets[0]) <= 60 && std::abs(sync_offsets[1]) <= 60, ErrorCode::ConfigInvalid,
            "sync offsets must be within 60 frames");
    require(track_lifetime >= 0, ErrorCode::ConfigInvalid, "track lifetime must be non-negative");
    require(pixel_noise >= 0.0 && outlier_rate >= 0.0 && outlier_rate < 1.0, ErrorCode::ConfigInvalid,
            "noise parameters out of range");
  }
};

inline std::string image_name(CameraId cam, int triplet) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s/%06d", std::string(to_string(cam)).c_str(), triplet);
  return buf;
}

/// Ground truth for the tracks generator. Image ids follow ImageKey::id().
struct SyntheticTracks {
  RigScenario scenario;
  Scene scene;
  std::vector<geometry::Pose> poses;  // world-to-camera, per image id
  std::vector<std::string> names;
  std::vector<Vec3> points;
  std::vector<Vec3> colors;
  matching::TrackSet tracks;  // one track per point with >= 2 observations
  std::vector<std::vector<int>> keypoint_point;     // per image, per keypoint
  std::vector<std::vector<char>> keypoint_outlier;  // per image, per keypoint

  int num_images() const { return static_cast<int>(poses.size()); }
  geometry::CameraIntrinsics rectified(int image) const {
    return scenario.cameras[static_cast<std::size_t>(image % 3)].intr;
  }
  double trajectory_length() const {
    double len = 0.0;
    for (std::size_t i = 3; i < poses.size(); i += 3) len += (poses[i + 1].center() - poses[i - 2].center()).norm();
    return len;
  }
};

/// Rig poses: the C camera drifts along +Y with small jitter; L and R share
/// its orientation and sit at the rig offsets.
inline std::vector<geometry::Pose> rig_poses(const RigScenario& s, int n_triplets, std::mt19937_64& rng) {
  std::normal_distribution<double> jitter(0.0, 1.0);
  std::vector<geometry::Pose> poses;
  for (int i = 0; i < n_triplets; ++i) {
    const double a = geometry::deg2rad(s.rotation_jitter_deg);
    const geometry::Mat3 R = geometry::so3_exp(Vec3(a * jitter(rng), a * jitter(rng), a * jitter(rng)));
    const Vec3 c_center(s.lateral_jitter_m * jitter(rng), i * s.triplet_spacing(), 0.01 * s.lateral_jitter_m * jitter(rng));
    const Vec3 offsets[3] = {s.t_lc, Vec3::Zero(), s.t_cr};
    for (int cam = 0; cam < 3; ++cam) poses.push_back(geometry::pose_from_center(R, c_center + R.transpose() * offsets[cam]));
  }
  return poses;
}

/// Samples surface points by casting random pixels of random cameras, then
/// observes every point in every camera where it is unoccluded and lands in
/// both the sensor (through the full distortion chain) and the rectified
/// frame. Observations are rectified pixels plus isotropic Gaussian noise with
/// the configured 2D RMS; outliers replace observations with uniform pixels.
inline SyntheticTracks generate_tracks(const RigScenario& s, int n_triplets, std::uint64_t seed) {
  s.validate();
  require(n_triplets >= 2, ErrorCode::InvalidArgument, "need at least two triplets");
  SyntheticTracks out;
  out.scenario = s;
  std::mt19937_64 rng(derive_seed(seed, {1}));
  out.poses = rig_poses(s, n_triplets, rng);
  const double y_end = (n_triplets - 1) * s.triplet_spacing();
  out.scene = make_undercarriage(-0.6, y_end + 0.6, s.height_min, s.height_max, derive_seed(seed, {2}));
  const int n_images = 3 * n_triplets;
  for (int id = 0; id < n_images; ++id) {
    const auto key = matching::ImageKey::from_id(id);
    out.names.push_back(image_name(key.camera, key.index));
  }

  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> pick_image(0, n_images - 1);
  int attempts = 0;
  std::vector<int> seeded_in;  // triplet each point was sampled from
  while (static_cast<int>(out.points.size()) < s.num_points && attempts < 50 * s.num_points) {
    ++attempts;
    const int id = pick_image(rng);
    const auto& intr = out.rectified(id);
    const Vec2 px(u(rng) * (intr.width - 1), u(rng) * (intr.height - 1));
    const Vec2 xn = intr.to_normalized(px);
    const geometry::Pose& P = out.poses[static_cast<std::size_t>(id)];
    const Vec3 dir = (P.rotation.conjugate() * Vec3(xn.x(), xn.y(), 1.0)).normalized();
    const auto hit = out.scene.raycast(P.center(), dir);
    if (!hit) continue;
    out.points.push_back(hit->point);
    out.colors.push_back(out.scene.albedo(*hit));
    seeded_in.push_back(id / 3);
  }

  const double axis_sigma = s.pixel_noise / std::sqrt(2.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  out.tracks.keypoints.assign(static_cast<std::size_t>(n_images), {});
  out.keypoint_point.assign(static_cast<std::size_t>(n_images), {});
  out.keypoint_outlier.assign(static_cast<std::size_t>(n_images), {});
  for (std::size_t p = 0; p < out.points.size(); ++p) {
    matching::Track track;
    for (int id = 0; id < n_images; ++id) {
      if (s.track_lifetime > 0) {
        const int first = seeded_in[p] - s.track_lifetime / 2;
        if (id / 3 < first || id / 3 >= first + s.track_lifetime) continue;
      }
      const geometry::Pose& P = out.poses[static_cast<std::size_t>(id)];
      const auto& model = s.cameras[static_cast<std::size_t>(id % 3)];
      const Vec3 Xc = P.apply(out.points[p]);
      if (Xc.z() <= 0.01) continue;
      const Vec2 xn(Xc.x() / Xc.z(), Xc.y() / Xc.z());
      const Vec2 rect = model.intr.to_pixel(xn);
      if (rect.x() < 0 || rect.y() < 0 || rect.x() > model.intr.width - 1 || rect.y() > model.intr.height - 1)
        continue;
      const Vec2 sensor = model.intr.to_pixel(geometry::distort(xn, model.dist));
      if (sensor.x() < 0 || sensor.y() < 0 || sensor.x() > model.intr.width - 1 ||
          sensor.y() > model.intr.height - 1)
        continue;
      if (!out.scene.visible(P.center(), out.points[p])) continue;
      Vec2 obs = rect + axis_sigma * Vec2(noise(rng), noise(rng));
      char outlier = 0;
      if (s.outlier_rate > 0.0 && u(rng) < s.outlier_rate) {
        obs = Vec2(u(rng) * (model.intr.width - 1), u(rng) * (model.intr.height - 1));
        outlier = 1;
      }
      auto& kps = out.tracks.keypoints[static_cast<std::size_t>(id)];
      track.push_back({id, static_cast<int>(kps.size())});
      kps.push_back({obs.x(), obs.y(), 0.5 + 0.5 * u(rng)});
      out.keypoint_point[static_cast<std::size_t>(id)].push_back(static_cast<int>(p));
      out.keypoint_outlier[static_cast<std::size_t>(id)].push_back(outlier);
    }
    if (track.size() >= 2) out.tracks.tracks.push_back(std::move(track));
  }
  return out;
}

/// Provider that answers with the generator's true correspondences: every
/// point observed in both images becomes a match.
class SyntheticMatchProvider final : public matching::MatchProvider {
 public:
  explicit SyntheticMatchProvider(const SyntheticTracks& truth) : truth_(truth) {
    for (int id = 0; id < truth.num_images(); ++id) {
      ids_[truth.names[static_cast<std::size_t>(id)]] = id;
      auto& m = by_point_.emplace_back();
      const auto& kp = truth.keypoint_point[static_cast<std::size_t>(id)];
      for (std::size_t k = 0; k < kp.size(); ++k) m[kp[k]] = static_cast<int>(k);
    }
  }

  bool has_image(const std::string& name) const override { return ids_.count(name) > 0; }

  std::vector<matching::Keypoint> keypoints(const std::string& name) const override {
    return truth_.tracks.keypoints[static_cast<std::size_t>(id(name))];
  }

  std::vector<matching::Match> matches(const std::string& a, const std::string& b) const override {
    const int ia = id(a), ib = id(b);
    std::vector<matching::Match> out;
    const auto& pa = truth_.keypoint_point[static_cast<std::size_t>(ia)];
    const auto& mb = by_point_[static_cast<std::size_t>(ib)];
    for (std::size_t k = 0; k < pa.size(); ++k)
      if (auto it = mb.find(pa[k]); it != mb.end()) out.push_back({static_cast<int>(k), it->second, 1.0});
    return out;
  }

 private:
  int id(const std::string& name) const {
    auto it = ids_.find(name);
    if (it == ids_.end()) fail(ErrorCode::UnknownImage, "synthetic scene has no image '" + name + "'");
    return it->second;
  }

  const SyntheticTracks& truth_;
  std::unordered_map<std::string, int> ids_;
  std::vector<std::unordered_map<int, int>> by_point_;
};

/// Writes one match interchange document per pair that shares at least one
/// point, under <dir>/pairs/, plus <dir>/manifest.json listing them.
inline int write_match_documents(const SyntheticTracks& t, const std::vector<matching::ImagePair>& pairs,
                                 const std::filesystem::path& dir) {
  const SyntheticMatchProvider provider(t);
  Json listed = Json::array();
  for (const auto& p : pairs) {
    const auto& a = t.names[static_cast<std::size_t>(p.a.id())];
    const auto& b = t.names[static_cast<std::size_t>(p.b.id())];
    const auto ms = provider.matches(a, b);
    if (ms.empty()) continue;
    const std::string file = "pairs/" + std::to_string(p.a.id()) + "_" + std::to_string(p.b.id()) + ".json";
    write_json_file(dir / file, matching::match_document(a, b, provider.keypoints(a), provider.keypoints(b), ms));
    listed.push_back(file);
  }
  write_json_file(dir / "manifest.json", Json{{"pairs", listed}});
  return static_cast<int>(listed.size());
}

/// Truth manifest: everything the metrics need without regenerating.
inline Json truth_manifest(const SyntheticTracks& t) {
  Json images = Json::array();
  for (int id = 0; id < t.num_images(); ++id) {
    const auto key = matching::ImageKey::from_id(id);
    Json img = geometry::pose_to_json(t.poses[static_cast<std::size_t>(id)]);
    img["name"] = t.names[static_cast<std::size_t>(id)];
    img["camera_id"] = std::string(to_string(key.camera));
    img["triplet"] = key.index;
    Json kps = Json::array();
    const auto& k = t.tracks.keypoints[static_cast<std::size_t>(id)];
    for (std::size_t i = 0; i < k.size(); ++i)
      kps.push_back({k[i].u, k[i].v, k[i].score, t.keypoint_point[static_cast<std::size_t>(id)][i],
                     static_cast<int>(t.keypoint_outlier[static_cast<std::size_t>(id)][i])});
    img["keypoints"] = std::move(kps);
    images.push_back(std::move(img));
  }
  Json points = Json::array();
  for (std::size_t p = 0; p < t.points.size(); ++p)
    points.push_back({t.points[p].x(), t.points[p].y(), t.points[p].z(), t.colors[p].x(), t.colors[p].y(),
                      t.colors[p].z()});
  Json cams = Json::array();
  for (const auto& c : t.scenario.cameras) cams.push_back(geometry::camera_model_to_json(c));
  const RigScenario& sc = t.scenario;
  const Json scenario{{"speed_mps", sc.speed_mps},
                      {"fps", sc.fps},
                      {"frames_per_triplet", sc.frames_per_triplet},
                      {"height_min", sc.height_min},
                      {"height_max", sc.height_max},
                      {"rotation_jitter_deg", sc.rotation_jitter_deg},
                      {"lateral_jitter_m", sc.lateral_jitter_m},
                      {"num_points", sc.num_points},
                      {"track_lifetime", sc.track_lifetime}};
  return Json{{"cameras", cams},
              {"scenario", scenario},
              {"t_lc", {t.scenario.t_lc.x(), t.scenario.t_lc.y(), t.scenario.t_lc.z()}},
              {"t_cr", {t.scenario.t_cr.x(), t.scenario.t_cr.y(), t.scenario.t_cr.z()}},
              {"pixel_noise_rms", t.scenario.pixel_noise},
              {"outlier_rate", t.scenario.outlier_rate},
              {"mean_track_length", t.tracks.mean_track_length()},
              {"images", images},
              {"points", points}};
}

}  // namespace rigrecon::synth
