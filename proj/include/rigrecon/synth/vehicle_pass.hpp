#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/json_io.hpp"
#include "rigrecon/core/random.hpp"
#include "rigrecon/core/types.hpp"
#include "rigrecon/imaging/filters.hpp"
#include "rigrecon/imaging/image.hpp"
#include "rigrecon/synth/texture.hpp"

namespace rigrecon::synth {

/// A vehicle rolling over three upward-facing cameras. The vehicle is parked
/// for the first frames of the global timeline, then accelerates and drives
/// with a fluctuating speed. Each stream starts recording at its own time.
struct VehiclePassConfig {
  int width = 64;
  int height = 64;
  int frames = 160;          // per stream
  int static_frames = 40;    // parked prefix of the global timeline
  double cruise_speed = 5.0; // rows per frame
  double noise_sigma = 0.01;
  int offset_left = 0;       // L[i + offset_left] shows the same instant as C[i]
  int offset_right = 0;
  double blur_fraction = 0.0;  // share of frames replaced by a blurred copy
  double blur_sigma = 3.0;
  std::uint64_t seed = 1;
};

/// Image rows travelled per frame by a surface `distance_m` above a camera
/// with focal length `focal_px`.
inline double rows_per_frame(double speed_mps, double fps, double focal_px, double distance_m) {
  require(fps > 0.0 && distance_m > 0.0, ErrorCode::InvalidArgument, "fps and distance must be positive");
  return speed_mps / fps * focal_px / distance_m;
}

struct VehiclePass {
  VehiclePassConfig config;
  std::vector<double> position;  // global timeline, rows travelled
  std::array<int, 3> start{};    // global time of each stream's frame 0
  std::array<std::vector<imaging::Image>, 3> frames;
  std::array<std::vector<char>, 3> blurred;

  /// Shift between consecutive frames of a stream as the generator moved them.
  std::vector<double> true_shifts(CameraId cam) const {
    const int s = start[static_cast<std::size_t>(index_of(cam))];
    std::vector<double> out;
    for (int i = 0; i + 1 < config.frames; ++i) out.push_back(position[s + i + 1] - position[s + i]);
    return out;
  }
};

/// Global-timeline speed: zero while parked, smooth ramp to cruise, then two
/// incommensurate fluctuations with random phases.
inline std::vector<double> speed_profile(int length, int static_frames, double cruise, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
  std::uniform_real_distribution<double> period(18.0, 40.0);
  const double p1 = phase(rng), p2 = phase(rng), t1 = period(rng), t2 = period(rng) * 0.37;
  constexpr int kRamp = 20;
  std::vector<double> v(static_cast<std::size_t>(length), 0.0);
  for (int t = static_frames; t < length; ++t) {
    const double u = std::min(1.0, (t - static_frames) / static_cast<double>(kRamp));
    const double ramp = u * u * (3 - 2 * u);
    const double wobble = 1.0 + 0.45 * std::sin(6.283185307179586 * t / t1 + p1) +
                          0.2 * std::sin(6.283185307179586 * t / t2 + p2);
    v[t] = cruise * ramp * wobble;
  }
  return v;
}

inline VehiclePass generate_vehicle_pass(const VehiclePassConfig& cfg) {
  require(cfg.frames >= 2 && cfg.width > 0 && cfg.height > 0, ErrorCode::InvalidArgument,
          "vehicle pass needs at least two frames");
  require(cfg.blur_fraction >= 0.0 && cfg.blur_fraction <= 1.0, ErrorCode::InvalidArgument,
          "blur fraction must lie in [0, 1]");
  VehiclePass pass;
  pass.config = cfg;
  std::mt19937_64 rng(cfg.seed);

  // Stream starts such that L[i + off_l] and C[i] share a global time.
  const int margin = std::max({0, cfg.offset_left, cfg.offset_right});
  const int sc = margin;
  pass.start = {sc - cfg.offset_left, sc, sc - cfg.offset_right};
  const int length = *std::max_element(pass.start.begin(), pass.start.end()) + cfg.frames;

  const std::vector<double> speed = speed_profile(length, cfg.static_frames + margin, cfg.cruise_speed, rng);
  pass.position.assign(static_cast<std::size_t>(length), 0.0);
  for (int t = 1; t < length; ++t) pass.position[t] = pass.position[t - 1] + speed[t];

  for (CameraId cam : kAllCameras) {
    const auto ci = static_cast<std::size_t>(index_of(cam));
    const ValueNoise tex(splitmix64(cfg.seed * 31 + ci + 1), 9.0);
    std::mt19937_64 noise_rng(splitmix64(cfg.seed * 131 + ci));
    std::normal_distribution<double> noise(0.0, cfg.noise_sigma);
    auto& stream = pass.frames[ci];
    stream.reserve(static_cast<std::size_t>(cfg.frames));
    for (int i = 0; i < cfg.frames; ++i) {
      const double p = pass.position[static_cast<std::size_t>(pass.start[ci] + i)];
      imaging::Image img(cfg.width, cfg.height, 1);
      // Content moves down by p rows: frame(x, y) = texture(x, y - p).
      for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x)
          img.at(x, y) = std::clamp(tex(x, y - p) + noise(noise_rng), 0.0, 1.0);
      std::mt19937_64 blur_rng(derive_seed(cfg.seed, {ci, static_cast<std::uint64_t>(i)}));
      const bool blur = std::uniform_real_distribution<double>(0.0, 1.0)(blur_rng) < cfg.blur_fraction;
      if (blur) img = imaging::gaussian_blur(img, cfg.blur_sigma);
      pass.blurred[ci].push_back(blur);
      stream.push_back(std::move(img));
    }
  }
  return pass;
}

inline std::string frame_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06d.pgm", i);
  return buf;
}

/// Offsets, stream starts, true shifts and blurred frames of a pass.
inline Json vehicle_pass_truth(const VehiclePass& pass) {
  Json streams = Json::object();
  for (CameraId cam : kAllCameras) {
    const auto ci = static_cast<std::size_t>(index_of(cam));
    std::vector<int> blurred;
    for (std::size_t i = 0; i < pass.blurred[ci].size(); ++i)
      if (pass.blurred[ci][i]) blurred.push_back(static_cast<int>(i));
    streams[std::string(to_string(cam))] =
        Json{{"start", pass.start[ci]}, {"true_shifts", pass.true_shifts(cam)}, {"blurred_frames", blurred}};
  }
  const auto& c = pass.config;
  return Json{{"offset_left", c.offset_left}, {"offset_right", c.offset_right}, {"frames", c.frames},
              {"width", c.width},            {"height", c.height},             {"cruise_rows_per_frame", c.cruise_speed},
              {"seed", c.seed},              {"streams", streams}};
}

/// Writes <dir>/{L,C,R}/frame_NNNNNN.pgm (8-bit) and <dir>/truth.json.
inline void write_vehicle_pass(const VehiclePass& pass, const std::filesystem::path& dir) {
  for (CameraId cam : kAllCameras) {
    const auto ci = static_cast<std::size_t>(index_of(cam));
    const auto sub = dir / std::string(to_string(cam));
    std::filesystem::create_directories(sub);
    for (std::size_t i = 0; i < pass.frames[ci].size(); ++i)
      imaging::write_pnm(sub / frame_name(static_cast<int>(i)), pass.frames[ci][i]);
  }
  write_json_file(dir / "truth.json", vehicle_pass_truth(pass));
}

}  // namespace rigrecon::synth
