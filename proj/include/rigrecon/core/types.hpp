#pragma once

#include <array>
#include <string>
#include <string_view>

#include "rigrecon/core/error.hpp"

namespace rigrecon {

/// Rig position. The center camera is the temporal and spatial reference.
enum class CameraId { L = 0, C = 1, R = 2 };

inline constexpr std::array<CameraId, 3> kAllCameras = {CameraId::L, CameraId::C, CameraId::R};

inline std::string_view to_string(CameraId id) {
  switch (id) {
    case CameraId::L: return "L";
    case CameraId::C: return "C";
    case CameraId::R: return "R";
  }
  return "?";
}

inline CameraId parse_camera_id(std::string_view s) {
  if (s == "L") return CameraId::L;
  if (s == "C") return CameraId::C;
  if (s == "R") return CameraId::R;
  fail(ErrorCode::ParseError, "unknown camera id '" + std::string(s) + "'");
}

inline int index_of(CameraId id) { return static_cast<int>(id); }

}  // namespace rigrecon
