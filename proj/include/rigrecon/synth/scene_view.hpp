#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rigrecon/core/parallel.hpp"
#include "rigrecon/geometry/camera.hpp"
#include "rigrecon/geometry/pose.hpp"
#include "rigrecon/imaging/image.hpp"
#include "rigrecon/synth/rig_scenario.hpp"
#include "rigrecon/synth/scene.hpp"

namespace rigrecon::synth {

/// Albedo image of the scene seen through a pinhole camera, averaged over
/// `supersample` x `supersample` rays per pixel. Rays that miss stay black.
inline imaging::Image render_scene_view(const Scene& scene, const geometry::Pose& pose,
                                        const geometry::CameraIntrinsics& K, int supersample = 2) {
  imaging::Image img(K.width, K.height, 3);
  const Vec3 eye = pose.center();
  const geometry::Mat3 Rt = pose.rotation_matrix().transpose();
  const double inv = 1.0 / (supersample * supersample);
  parallel_for(static_cast<std::size_t>(K.height), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < K.width; ++x) {
      Vec3 sum = Vec3::Zero();
      for (int sy = 0; sy < supersample; ++sy)
        for (int sx = 0; sx < supersample; ++sx) {
          const double u = x - 0.5 + (sx + 0.5) / supersample, v = y - 0.5 + (sy + 0.5) / supersample;
          const Vec3 d = (Rt * Vec3((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0)).normalized();
          if (const auto hit = scene.raycast(eye, d)) sum += scene.albedo(*hit);
        }
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = sum[c] * inv;
    }
  });
  return img;
}

/// Renders every image of a synthetic sequence with its rectified intrinsics
/// scaled by `scale` and writes <dir>/<image name>.ppm.
inline std::vector<std::string> write_scene_views(const SyntheticTracks& t, double scale,
                                                  const std::filesystem::path& dir) {
  std::vector<std::string> files;
  for (int id = 0; id < t.num_images(); ++id) {
    const auto K = t.rectified(id).scaled(scale);
    const auto name = t.names[static_cast<std::size_t>(id)] + ".ppm";
    imaging::write_pnm(dir / name, render_scene_view(t.scene, t.poses[static_cast<std::size_t>(id)], K));
    files.push_back(name);
  }
  return files;
}

}  // namespace rigrecon::synth
