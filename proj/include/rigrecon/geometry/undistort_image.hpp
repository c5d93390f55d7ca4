#pragma once

#include "rigrecon/core/parallel.hpp"
#include "rigrecon/geometry/camera.hpp"
#include "rigrecon/imaging/image.hpp"

namespace rigrecon::geometry {

/// Inverse-mapping rectification. Every output pixel is taken to normalized
/// coordinates with `new_intr`, pushed through the distortion model and
/// sampled bilinearly from the source with `intr`. Pixels that land outside
/// the source are black.
inline imaging::Image undistort_image(const imaging::Image& img, const CameraIntrinsics& intr,
                                      const DistortionCoeffs& dist, const CameraIntrinsics& new_intr) {
  require(img.width == intr.width && img.height == intr.height, ErrorCode::InvalidArgument,
          "image size does not match the camera intrinsics");
  imaging::Image out(new_intr.width, new_intr.height, img.channels, 0.0);
  parallel_for(static_cast<std::size_t>(new_intr.height), [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < new_intr.width; ++x) {
      const Vec2 src = intr.to_pixel(distort(new_intr.to_normalized(Vec2(x, y)), dist));
      imaging::sample_bilinear(img, src.x(), src.y(), &out.at(x, y, 0));
    }
  });
  return out;
}

}  // namespace rigrecon::geometry
