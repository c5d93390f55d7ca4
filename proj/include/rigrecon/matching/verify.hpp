#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/parallel.hpp"
#include "rigrecon/core/random.hpp"
#include "rigrecon/geometry/epipolar.hpp"
#include "rigrecon/matching/matches.hpp"

namespace rigrecon::matching {

struct RansacOptions {
  double threshold_px = 2.0;  // Sampson distance
  double confidence = 0.9999;
  int max_iterations = 10000;
  int min_inliers = 15;  // pairs below this are discarded
};

struct VerifiedPair {
  MatchSet inliers;
  geometry::Mat3 essential = geometry::Mat3::Zero();
  std::vector<char> inlier_mask;  // over the input matches
  int iterations = 0;
  bool kept = false;
  std::string reason;  // why a pair was discarded
};

namespace detail {

inline int ransac_trials_needed(double inlier_fraction, double confidence, int sample_size) {
  const double p_good = std::pow(inlier_fraction, sample_size);
  if (p_good >= 1.0) return 1;
  if (p_good <= 0.0) return std::numeric_limits<int>::max();
  // log1p keeps tiny success probabilities from rounding to log(1) = 0.
  const double n = std::log1p(-confidence) / std::log1p(-p_good);
  return !(n <= 1e9) ? std::numeric_limits<int>::max() : static_cast<int>(std::ceil(n));
}

}  // namespace detail

/// Essential-matrix RANSAC on one pair. Throws TooFewMatches below 8 matches
/// and DegenerateConfiguration when no model reaches 8 inliers; pairs with
/// fewer than `min_inliers` inliers come back with kept = false.
inline VerifiedPair verify_pair(const MatchSet& set, const std::vector<Keypoint>& kps_a,
                                const std::vector<Keypoint>& kps_b, const geometry::CameraIntrinsics& intr_a,
                                const geometry::CameraIntrinsics& intr_b, const RansacOptions& opts,
                                std::uint64_t seed) {
  using geometry::Vec2;
  const int n = static_cast<int>(set.matches.size());
  if (n < 8) fail(ErrorCode::TooFewMatches, std::to_string(n) + " matches, 8 needed");

  std::vector<Vec2> pa(n), pb(n), xa(n), xb(n);
  for (int i = 0; i < n; ++i) {
    const Keypoint& ka = kps_a[static_cast<std::size_t>(set.matches[i].ia)];
    const Keypoint& kb = kps_b[static_cast<std::size_t>(set.matches[i].ib)];
    pa[i] = {ka.u, ka.v};
    pb[i] = {kb.u, kb.v};
    xa[i] = intr_a.to_normalized(pa[i]);
    xb[i] = intr_b.to_normalized(pb[i]);
  }

  auto score = [&](const geometry::Mat3& E, std::vector<char>& mask, double& cost) {
    const geometry::Mat3 F = geometry::fundamental_from_essential(E, intr_a, intr_b);
    int count = 0;
    cost = 0.0;
    mask.assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
      const double d = geometry::sampson_distance(F, pa[i], pb[i]);
      if (d < opts.threshold_px) {
        mask[i] = 1;
        ++count;
        cost += d * d;
      }
    }
    return count;
  };

  std::mt19937_64 rng(seed);
  std::vector<int> all(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all[i] = i;

  VerifiedPair out;
  geometry::Mat3 best_E = geometry::Mat3::Zero();
  std::vector<char> best_mask, mask;
  int best_count = -1;
  double best_cost = 0.0;
  int needed = opts.max_iterations;
  std::vector<int> sample(8);
  for (int it = 0; it < std::min(needed, opts.max_iterations); ++it) {
    // Partial Fisher-Yates draw of 8 distinct indices.
    for (int k = 0; k < 8; ++k) {
      std::uniform_int_distribution<int> pick(k, n - 1);
      std::swap(all[k], all[pick(rng)]);
      sample[k] = all[k];
    }
    ++out.iterations;
    const geometry::Mat3 E = geometry::essential_eight_point(xa, xb, sample);
    if (!E.allFinite() || E.norm() == 0.0) continue;
    double cost = 0.0;
    const int count = score(E, mask, cost);
    if (count > best_count || (count == best_count && cost < best_cost)) {
      best_count = count;
      best_cost = cost;
      best_E = E;
      best_mask = mask;
      needed = detail::ransac_trials_needed(static_cast<double>(count) / n, opts.confidence, 8);
    }
  }
  if (best_count < 8) fail(ErrorCode::DegenerateConfiguration, "no essential matrix with 8 inliers");

  // Refit on the consensus set while it does not shrink.
  for (int round = 0; round < 5; ++round) {
    std::vector<int> idx;
    for (int i = 0; i < n; ++i)
      if (best_mask[i]) idx.push_back(i);
    const geometry::Mat3 E = geometry::essential_eight_point(xa, xb, idx);
    double cost = 0.0;
    const int count = score(E, mask, cost);
    if (count < best_count || (count == best_count && cost >= best_cost)) break;
    best_count = count;
    best_cost = cost;
    best_E = E;
    best_mask = mask;
  }

  out.essential = best_E;
  out.inlier_mask = best_mask;
  out.inliers.image_a = set.image_a;
  out.inliers.image_b = set.image_b;
  out.inliers.cls = set.cls;
  for (int i = 0; i < n; ++i)
    if (best_mask[i]) out.inliers.matches.push_back(set.matches[i]);
  out.inliers.inlier_ratio = static_cast<double>(best_count) / n;
  out.kept = best_count >= opts.min_inliers;
  if (!out.kept) out.reason = "TooFewInliers";
  return out;
}

struct DroppedPair {
  int image_a = 0;
  int image_b = 0;
  std::string reason;
};

struct VerificationResult {
  std::vector<MatchSet> kept;
  std::vector<DroppedPair> dropped;
};

/// Verifies every pair in parallel; each pair's generator is seeded from the
/// run seed and the two image ids, so results do not depend on scheduling.
inline VerificationResult verify_all(const std::vector<MatchSet>& sets,
                                     const std::vector<std::vector<Keypoint>>& keypoints,
                                     const std::array<geometry::CameraIntrinsics, 3>& intr, const RansacOptions& opts,
                                     std::uint64_t run_seed) {
  std::vector<VerifiedPair> results(sets.size());
  std::vector<std::string> errors(sets.size());
  parallel_for(sets.size(), [&](std::size_t i) {
    const MatchSet& s = sets[i];
    const auto ka = ImageKey::from_id(s.image_a), kb = ImageKey::from_id(s.image_b);
    try {
      results[i] = verify_pair(s, keypoints[static_cast<std::size_t>(s.image_a)],
                               keypoints[static_cast<std::size_t>(s.image_b)], intr[index_of(ka.camera)],
                               intr[index_of(kb.camera)], opts,
                               derive_seed(run_seed, {static_cast<std::uint64_t>(s.image_a),
                                                      static_cast<std::uint64_t>(s.image_b)}));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TooFewMatches && e.code() != ErrorCode::DegenerateConfiguration) throw;
      errors[i] = std::string(to_string(e.code()));
    }
  });
  VerificationResult out;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (errors[i].empty() && results[i].kept) {
      out.kept.push_back(std::move(results[i].inliers));
    } else {
      out.dropped.push_back({sets[i].image_a, sets[i].image_b, errors[i].empty() ? results[i].reason : errors[i]});
    }
  }
  return out;
}

}  // namespace rigrecon::matching
