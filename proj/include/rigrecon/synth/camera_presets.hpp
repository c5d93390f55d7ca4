#pragma once

#include "rigrecon/geometry/camera.hpp"

namespace rigrecon::synth {

/// Strong barrel profile of a ~150 degree wide-angle lens in the rational
/// model. Monotone over the whole 160 degree field.
inline geometry::DistortionCoeffs wide_angle_distortion() {
  geometry::DistortionCoeffs d;
  d.k1 = 0.25;
  d.k2 = 0.01;
  d.k3 = 0.0002;
  d.k4 = 0.6;
  d.k5 = 0.05;
  d.k6 = 0.001;
  d.p1 = 4e-4;
  d.p2 = -3e-4;
  return d;
}

/// 1920x1080 rig camera with the wide-angle profile.
inline geometry::CameraModel rig_camera(double scale = 1.0) {
  geometry::CameraModel m;
  m.intr.width = 1920;
  m.intr.height = 1080;
  m.intr.fx = 560.0;
  m.intr.fy = 560.0;
  m.intr.cx = 959.5;
  m.intr.cy = 539.5;
  if (scale != 1.0) m.intr = m.intr.scaled(scale);
  m.dist = wide_angle_distortion();
  return m;
}

}  // namespace rigrecon::synth
