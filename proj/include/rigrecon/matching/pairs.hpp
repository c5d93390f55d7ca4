#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/types.hpp"

namespace rigrecon::matching {

/// Image of the selected set: camera plus position in the triplet list.
struct ImageKey {
  CameraId camera = CameraId::C;
  int index = 0;

  bool operator==(const ImageKey& o) const { return camera == o.camera && index == o.index; }
  /// Dense id used for keypoint and pose tables.
  int id() const { return index * 3 + index_of(camera); }
  static ImageKey from_id(int id) { return {static_cast<CameraId>(id % 3), id / 3}; }
};

enum class PairClass { Intra, CrossLC, CrossCR, CrossLR };

inline std::string_view to_string(PairClass c) {
  switch (c) {
    case PairClass::Intra: return "intra";
    case PairClass::CrossLC: return "cross_LC";
    case PairClass::CrossCR: return "cross_CR";
    case PairClass::CrossLR: return "cross_LR";
  }
  return "?";
}

struct ImagePair {
  ImageKey a;
  ImageKey b;
  PairClass cls = PairClass::Intra;
};

inline PairClass classify(const ImageKey& a, const ImageKey& b) {
  if (a.camera == b.camera) return PairClass::Intra;
  const bool has_l = a.camera == CameraId::L || b.camera == CameraId::L;
  const bool has_r = a.camera == CameraId::R || b.camera == CameraId::R;
  if (has_l && has_r) return PairClass::CrossLR;
  return has_l ? PairClass::CrossLC : PairClass::CrossCR;
}

/// Windowed schedule over n triplets: same-camera pairs with 0 < |i - j| <= w,
/// L-C and C-R pairs with |i - j| <= w. Never pairs L with R.
inline std::vector<ImagePair> schedule_pairs(int n, int window) {
  require(n >= 0 && window >= 0, ErrorCode::InvalidArgument, "schedule needs n >= 0 and window >= 0");
  std::vector<ImagePair> out;
  for (CameraId cam : kAllCameras)
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j <= std::min(n - 1, i + window); ++j)
        out.push_back({{cam, i}, {cam, j}, PairClass::Intra});
  const std::pair<CameraId, CameraId> cross[] = {{CameraId::L, CameraId::C}, {CameraId::C, CameraId::R}};
  for (const auto& [ca, cb] : cross)
    for (int i = 0; i < n; ++i)
      for (int j = std::max(0, i - window); j <= std::min(n - 1, i + window); ++j)
        out.push_back({{ca, i}, {cb, j}, ca == CameraId::L ? PairClass::CrossLC : PairClass::CrossCR});
  for (const ImagePair& p : out)
    if (p.cls == PairClass::CrossLR || classify(p.a, p.b) == PairClass::CrossLR)
      fail(ErrorCode::StageFailed, "schedule produced an L-R pair");
  return out;
}

/// Ablation schedule: every unordered pair of distinct images, L-R included,
/// nearest in time first, truncated to `cap` pairs.
inline std::vector<ImagePair> schedule_all_pairs(int n, int cap = 2000) {
  std::vector<ImagePair> out;
  for (int d = 0; d < n && static_cast<int>(out.size()) < cap; ++d)
    for (int i = 0; i + d < n; ++i)
      for (int ca = 0; ca < 3; ++ca)
        for (int cb = 0; cb < 3; ++cb) {
          if (d == 0 && cb <= ca) continue;
          const ImageKey a{static_cast<CameraId>(ca), i}, b{static_cast<CameraId>(cb), i + d};
          out.push_back({a, b, classify(a, b)});
        }
  if (static_cast<int>(out.size()) > cap) out.resize(static_cast<std::size_t>(cap));
  return out;
}

}  // namespace rigrecon::matching
