#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/json_io.hpp"
#include "rigrecon/core/parallel.hpp"
#include "rigrecon/core/types.hpp"
#include "rigrecon/imaging/filters.hpp"

namespace rigrecon::matching {

/// One synchronized instant: frames indexed by CameraId.
struct FrameTriplet {
  int index = 0;  // position in the synced range
  std::array<std::string, 3> frames;
  std::array<double, 3> sharpness{};
  double score = 0.0;  // mean of the three Laplacian variances
};

/// Reads the triplet list of a sync manifest.
inline std::vector<FrameTriplet> triplets_from_manifest(const Json& manifest) {
  std::vector<FrameTriplet> out;
  for (const Json& t : json_get<Json>(manifest, "triplets")) {
    FrameTriplet ft;
    ft.index = json_get<int>(t, "index");
    for (CameraId cam : kAllCameras)
      ft.frames[static_cast<std::size_t>(index_of(cam))] = json_get<std::string>(t, std::string(to_string(cam)).c_str());
    out.push_back(std::move(ft));
  }
  return out;
}

/// Fills sharpness and score; `load(name)` returns the frame.
inline void score_triplets(std::vector<FrameTriplet>& triplets,
                           const std::function<imaging::Image(const std::string&)>& load) {
  parallel_for(triplets.size() * 3, [&](std::size_t k) {
    FrameTriplet& t = triplets[k / 3];
    t.sharpness[k % 3] = imaging::laplacian_variance(load(t.frames[k % 3])).value;
  });
  for (FrameTriplet& t : triplets) t.score = (t.sharpness[0] + t.sharpness[1] + t.sharpness[2]) / 3.0;
}

/// Splits [0, n) into k bins [b*n/k, (b+1)*n/k) and keeps the highest-score
/// triplet of each (lowest index on ties). Output is ordered by index.
inline std::vector<FrameTriplet> select_triplets(const std::vector<FrameTriplet>& candidates, int k) {
  require(k >= 1, ErrorCode::InvalidArgument, "k must be positive");
  const auto n = static_cast<long long>(candidates.size());
  if (n < k)
    fail(ErrorCode::InsufficientFrames,
         "synced range has " + std::to_string(n) + " triplets, " + std::to_string(k) + " requested");
  std::vector<FrameTriplet> out;
  out.reserve(static_cast<std::size_t>(k));
  for (long long b = 0; b < k; ++b) {
    const long long lo = b * n / k, hi = (b + 1) * n / k;
    long long best = lo;
    for (long long i = lo + 1; i < hi; ++i)
      if (candidates[i].score > candidates[best].score) best = i;
    out.push_back(candidates[best]);
  }
  return out;
}

}  // namespace rigrecon::matching
