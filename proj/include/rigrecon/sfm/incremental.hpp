#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/random.hpp"
#include "rigrecon/geometry/epipolar.hpp"
#include "rigrecon/matching/verify.hpp"
#include "rigrecon/sfm/bundle.hpp"

namespace rigrecon::sfm {

struct SfmOptions {
  RigPrior prior;
  int seed_min_inliers = 50;
  double seed_min_angle_deg = 1.5;
  int min_correspondences = 12;
  double resection_threshold_px = 4.0;
  int resection_max_iterations = 1000;
  double min_triangulation_angle_deg = 1.0;
  double max_reprojection_px = 4.0;
  double global_ba_growth = 1.2;  // global BA whenever the registered count grows by this factor
  BundleOptions ba;
  matching::RansacOptions ransac;
  std::uint64_t seed = 0;
};

struct SeedCandidate {
  int image_a = -1;
  int image_b = -1;
  int inliers = 0;
  double median_angle_deg = 0.0;
  int chirality_survivors = 0;  // decompositions with the most points in front of both cameras
  Pose pose_b;                  // pose of b with a at the origin, unit baseline
  std::vector<int> tracks;
  std::vector<Vec3> points;
  double score() const { return inliers * median_angle_deg; }
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

inline Vec3 ray_direction(const Pose& p, const geometry::CameraIntrinsics& k, const Vec2& px) {
  const Vec2 xn = k.to_normalized(px);
  return (p.rotation.conjugate() * Vec3(xn.x(), xn.y(), 1.0)).normalized();
}

}  // namespace detail

/// Two-view seed: RANSAC on the shared tracks, 4-way chirality test,
/// triangulation. Returns nothing when the pair is too weak.
inline std::optional<SeedCandidate> evaluate_seed(const matching::TrackSet& ts,
                                                  const std::array<geometry::CameraIntrinsics, 3>& intr, int a,
                                                  int b, const SfmOptions& opts) {
  const auto ka = matching::ImageKey::from_id(a), kb = matching::ImageKey::from_id(b);
  const auto& Ka = intr[static_cast<std::size_t>(index_of(ka.camera))];
  const auto& Kb = intr[static_cast<std::size_t>(index_of(kb.camera))];
  matching::MatchSet set;
  set.image_a = a;
  set.image_b = b;
  std::vector<int> track_of;
  for (std::size_t t = 0; t < ts.tracks.size(); ++t) {
    int ia = -1, ib = -1;
    for (const Observation& o : ts.tracks[t]) {
      if (o.image == a) ia = o.keypoint;
      if (o.image == b) ib = o.keypoint;
    }
    if (ia >= 0 && ib >= 0) {
      set.matches.push_back({ia, ib, 1.0});
      track_of.push_back(static_cast<int>(t));
    }
  }
  if (static_cast<int>(set.matches.size()) < opts.seed_min_inliers) return std::nullopt;
  const auto& kps_a = ts.keypoints[static_cast<std::size_t>(a)];
  const auto& kps_b = ts.keypoints[static_cast<std::size_t>(b)];
  matching::VerifiedPair v;
  try {
    v = matching::verify_pair(set, kps_a, kps_b, Ka, Kb, opts.ransac,
                              derive_seed(opts.seed, {0x5EEDu, static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b)}));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::DegenerateConfiguration || e.code() == ErrorCode::TooFewMatches) return std::nullopt;
    throw;
  }
  if (static_cast<int>(v.inliers.matches.size()) < opts.seed_min_inliers) return std::nullopt;

  std::vector<Vec2> xa, xb;
  std::vector<int> tracks;
  for (std::size_t i = 0; i < set.matches.size(); ++i) {
    if (!v.inlier_mask[i]) continue;
    const auto& pa = kps_a[static_cast<std::size_t>(set.matches[i].ia)];
    const auto& pb = kps_b[static_cast<std::size_t>(set.matches[i].ib)];
    xa.push_back(Ka.to_normalized({pa.u, pa.v}));
    xb.push_back(Kb.to_normalized({pb.u, pb.v}));
    tracks.push_back(track_of[i]);
  }

  const Pose origin = Pose::identity();
  const auto candidates = geometry::decompose_essential(v.essential);
  std::array<int, 4> in_front{};
  for (int c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < xa.size(); ++i) {
      const Vec3 X = geometry::triangulate_linear({origin, candidates[c]}, {xa[i], xb[i]});
      in_front[c] += X.z() > 0.0 && candidates[c].apply(X).z() > 0.0;
    }
  const int best = static_cast<int>(std::max_element(in_front.begin(), in_front.end()) - in_front.begin());

  SeedCandidate sc;
  sc.image_a = a;
  sc.image_b = b;
  sc.pose_b = candidates[best];
  for (int c = 0; c < 4; ++c) sc.chirality_survivors += in_front[c] == in_front[best];
  const Vec3 cb = sc.pose_b.center();
  std::vector<double> angles;
  for (std::size_t i = 0; i < xa.size(); ++i) {
    const Vec3 X = geometry::triangulate_linear({origin, sc.pose_b}, {xa[i], xb[i]});
    const Vec3 Xb = sc.pose_b.apply(X);
    if (X.z() <= 0.0 || Xb.z() <= 0.0) continue;
    const double ea = (Ka.to_pixel({X.x() / X.z(), X.y() / X.z()}) - Ka.to_pixel(xa[i])).norm();
    const double eb = (Kb.to_pixel({Xb.x() / Xb.z(), Xb.y() / Xb.z()}) - Kb.to_pixel(xb[i])).norm();
    if (ea > opts.max_reprojection_px || eb > opts.max_reprojection_px) continue;
    sc.tracks.push_back(tracks[i]);
    sc.points.push_back(X);
    angles.push_back(geometry::rad2deg(geometry::triangulation_angle(X, Vec3::Zero(), cb)));
  }
  sc.inliers = static_cast<int>(sc.tracks.size());
  sc.median_angle_deg = detail::median(angles);
  if (sc.inliers < opts.seed_min_inliers || sc.median_angle_deg < opts.seed_min_angle_deg) return std::nullopt;
  return sc;
}

/// Counts of tracks shared by each image pair.
inline std::map<std::pair<int, int>, int> shared_track_counts(const matching::TrackSet& ts) {
  std::map<std::pair<int, int>, int> counts;
  for (const auto& t : ts.tracks)
    for (std::size_t i = 0; i < t.size(); ++i)
      for (std::size_t j = i + 1; j < t.size(); ++j)
        ++counts[{std::min(t[i].image, t[j].image), std::max(t[i].image, t[j].image)}];
  return counts;
}

/// Picks the pair maximizing inliers x median triangulation angle and builds
/// a two-view model from it (first camera at the origin, unit baseline).
inline SparseModel initialize_pair(const matching::TrackSet& ts, const std::vector<std::string>& names,
                                   const std::array<geometry::CameraIntrinsics, 3>& intr, const SfmOptions& opts,
                                   SeedCandidate* chosen = nullptr) {
  std::optional<SeedCandidate> best;
  for (const auto& [pair, count] : shared_track_counts(ts)) {
    if (count < opts.seed_min_inliers) continue;
    auto c = evaluate_seed(ts, intr, pair.first, pair.second, opts);
    if (c && (!best || c->score() > best->score())) best = std::move(c);
  }
  if (!best) fail(ErrorCode::NoValidSeedPair, "no image pair with enough inliers and parallax to start from");
  SparseModel m = make_model(ts.keypoints, names, intr);
  auto& ia = m.images[static_cast<std::size_t>(best->image_a)];
  auto& ib = m.images[static_cast<std::size_t>(best->image_b)];
  ia.pose = Pose::identity();
  ia.registered = true;
  ib.pose = best->pose_b;
  ib.registered = true;
  for (std::size_t i = 0; i < best->tracks.size(); ++i) {
    ModelPoint p;
    p.xyz = best->points[i];
    p.track = best->tracks[i];
    for (const Observation& o : ts.tracks[static_cast<std::size_t>(p.track)])
      if (o.image == best->image_a || o.image == best->image_b) p.obs.push_back(o);
    m.points.push_back(std::move(p));
  }
  m.stats = model_stats(m);
  if (chosen) *chosen = *best;
  return m;
}

/// Pose-only Levenberg-Marquardt with the Huber robustifier. Points behind
/// the camera contribute a constant penalty and no gradient.
inline Pose refine_pose(Pose pose, const std::vector<Vec3>& X, const std::vector<Vec2>& px,
                        const geometry::CameraIntrinsics& intr, double huber_px, int iterations = 20) {
  auto cost_of = [&](const Pose& p) {
    double c = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) {
      const auto t = reprojection_term(p, X[i], intr, px[i]);
      c += t.valid ? huber(t.residual.squaredNorm(), huber_px) : huber(1e6, huber_px);
    }
    return c;
  };
  double cost = cost_of(pose), lambda = 1e-3;
  for (int it = 0; it < iterations; ++it) {
    Mat6 H = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (std::size_t i = 0; i < X.size(); ++i) {
      const auto t = reprojection_term(pose, X[i], intr, px[i]);
      if (!t.valid) continue;
      const double w = huber_weight(t.residual.squaredNorm(), huber_px);
      H += w * t.J_pose.transpose() * t.J_pose;
      g += w * t.J_pose.transpose() * t.residual;
    }
    bool improved = false;
    for (int tries = 0; tries < 10 && !improved; ++tries) {
      Mat6 Hd = H;
      Hd.diagonal() *= 1.0 + lambda;
      const Pose trial = apply_pose_update(pose, Hd.ldlt().solve(-g));
      const double c = cost_of(trial);
      if (c <= cost) {
        improved = (cost - c) > 1e-12 * cost;
        pose = trial;
        cost = c;
        lambda = std::max(lambda * 0.1, 1e-12);
        if (!improved) return pose;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  return pose;
}

/// Index of the model point of each track, -1 when not triangulated.
inline std::vector<int> track_points(const SparseModel& m, std::size_t n_tracks) {
  std::vector<int> tp(n_tracks, -1);
  for (std::size_t p = 0; p < m.points.size(); ++p)
    if (m.points[p].track >= 0) tp[static_cast<std::size_t>(m.points[p].track)] = static_cast<int>(p);
  return tp;
}

/// 2D-3D correspondences of an unregistered image against the model.
struct Correspondences {
  std::vector<Vec3> X;
  std::vector<Vec2> px;
  std::vector<int> point;
  std::vector<int> keypoint;
};

inline Correspondences correspondences(const SparseModel& m, const matching::TrackSet& ts,
                                       const std::vector<int>& tp, int image) {
  Correspondences c;
  for (std::size_t t = 0; t < ts.tracks.size(); ++t) {
    if (tp[t] < 0) continue;
    for (const Observation& o : ts.tracks[t])
      if (o.image == image) {
        c.X.push_back(m.points[static_cast<std::size_t>(tp[t])].xyz);
        c.px.push_back(m.observed(o));
        c.point.push_back(tp[t]);
        c.keypoint.push_back(o.keypoint);
      }
  }
  return c;
}

/// Registers `image`: DLT resectioning inside RANSAC plus a hypothesis from
/// the registered image sharing the most points, both refined by LM; the one
/// with more inliers wins. Inlier observations join their points.
inline void register_image(SparseModel& m, const matching::TrackSet& ts, int image, const SfmOptions& opts) {
  const auto tp = track_points(m, ts.tracks.size());
  const Correspondences c = correspondences(m, ts, tp, image);
  const int n = static_cast<int>(c.X.size());
  if (n < opts.min_correspondences)
    fail(ErrorCode::RegistrationFailed, m.images[static_cast<std::size_t>(image)].name + ": " + std::to_string(n) +
                                            " 2D-3D correspondences, " + std::to_string(opts.min_correspondences) +
                                            " needed");
  const auto& K = m.intrinsics(image);
  std::vector<Vec2> xn(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) xn[i] = K.to_normalized(c.px[i]);
  const double thr = opts.resection_threshold_px;
  auto inliers_of = [&](const Pose& p, std::vector<int>* idx) {
    int count = 0;
    for (int i = 0; i < n; ++i) {
      const Vec3 Xc = p.apply(c.X[i]);
      if (Xc.z() <= geometry::kMinDepth) continue;
      if ((K.to_pixel({Xc.x() / Xc.z(), Xc.y() / Xc.z()}) - c.px[i]).norm() < thr) {
        ++count;
        if (idx) idx->push_back(i);
      }
    }
    return count;
  };

  std::vector<Pose> hypotheses;
  // DLT inside RANSAC.
  {
    std::mt19937_64 rng(derive_seed(opts.seed, {0x7E5Eu, static_cast<std::uint64_t>(image)}));
    std::vector<int> all(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) all[i] = i;
    std::vector<int> sample(6);
    int best = -1, needed = opts.resection_max_iterations;
    Pose best_pose;
    for (int it = 0; it < std::min(needed, opts.resection_max_iterations); ++it) {
      for (int k = 0; k < 6; ++k) {
        std::uniform_int_distribution<int> pick(k, n - 1);
        std::swap(all[k], all[pick(rng)]);
        sample[k] = all[k];
      }
      Pose p;
      if (!geometry::resection_dlt(c.X, xn, sample, &p)) continue;
      const int count = inliers_of(p, nullptr);
      if (count > best) {
        best = count;
        best_pose = p;
        needed = matching::detail::ransac_trials_needed(static_cast<double>(count) / n, 0.9999, 6);
      }
    }
    if (best >= 6) hypotheses.push_back(best_pose);
  }
  // Pose of the registered image with the most shared points.
  {
    std::map<int, int> shared;
    for (int pt : c.point)
      for (const Observation& o : m.points[static_cast<std::size_t>(pt)].obs) ++shared[o.image];
    int best_img = -1, best_count = 0;
    for (const auto& [img, cnt] : shared)
      if (cnt > best_count) {
        best_img = img;
        best_count = cnt;
      }
    if (best_img >= 0) hypotheses.push_back(m.pose(best_img));
  }

  Pose best_pose;
  std::vector<int> best_idx;
  for (Pose h : hypotheses) {
    for (int round = 0; round < 3; ++round) {
      std::vector<int> idx;
      inliers_of(h, &idx);
      if (idx.size() < 6) idx.resize(0);
      std::vector<Vec3> Xs;
      std::vector<Vec2> ps;
      // The first round of the neighbor hypothesis uses everything, robustly.
      if (idx.empty()) {
        Xs = c.X;
        ps = c.px;
      } else {
        for (int i : idx) {
          Xs.push_back(c.X[i]);
          ps.push_back(c.px[i]);
        }
      }
      h = refine_pose(h, Xs, ps, K, opts.ba.huber_px > 0 ? opts.ba.huber_px : thr);
    }
    std::vector<int> idx;
    inliers_of(h, &idx);
    if (idx.size() > best_idx.size()) {
      best_idx = std::move(idx);
      best_pose = h;
    }
  }
  if (static_cast<int>(best_idx.size()) < opts.min_correspondences)
    fail(ErrorCode::RegistrationFailed, m.images[static_cast<std::size_t>(image)].name + ": " +
                                            std::to_string(best_idx.size()) + " resection inliers");
  auto& im = m.images[static_cast<std::size_t>(image)];
  im.pose = best_pose;
  im.registered = true;
  for (int i : best_idx) m.points[static_cast<std::size_t>(c.point[i])].obs.push_back({image, c.keypoint[i]});
}

/// Triangulates every track without a point that has two or more registered
/// observations: midpoint of the rays, then a few Gauss-Newton steps.
/// Observations reprojecting worse than the threshold are left out; the point
/// is kept when two or more remain, all in front, spanning the minimum angle.
inline int triangulate_tracks(SparseModel& m, const matching::TrackSet& ts, const SfmOptions& opts) {
  const auto tp = track_points(m, ts.tracks.size());
  const double min_angle = geometry::deg2rad(opts.min_triangulation_angle_deg);
  std::vector<std::optional<ModelPoint>> made(ts.tracks.size());
  parallel_for(ts.tracks.size(), [&](std::size_t t) {
    if (tp[t] >= 0) return;
    std::vector<Observation> obs;
    for (const Observation& o : ts.tracks[t])
      if (m.registered(o.image)) obs.push_back(o);
    if (obs.size() < 2) return;
    for (int attempt = 0; attempt < 2 && obs.size() >= 2; ++attempt) {
      std::vector<Vec3> centers, dirs;
      for (const Observation& o : obs) {
        centers.push_back(m.pose(o.image).center());
        dirs.push_back(detail::ray_direction(m.pose(o.image), m.intrinsics(o.image), m.observed(o)));
      }
      double max_angle = 0.0;
      for (std::size_t i = 0; i < dirs.size(); ++i)
        for (std::size_t j = i + 1; j < dirs.size(); ++j)
          max_angle = std::max(max_angle, std::acos(std::clamp(dirs[i].dot(dirs[j]), -1.0, 1.0)));
      if (max_angle < min_angle) return;
      Vec3 X = geometry::triangulate_midpoint(centers, dirs);
      for (int it = 0; it < 5; ++it) {
        Mat3 H = Mat3::Zero();
        Vec3 g = Vec3::Zero();
        bool ok = true;
        for (const Observation& o : obs) {
          const auto term = reprojection_term(m.pose(o.image), X, m.intrinsics(o.image), m.observed(o));
          if (!term.valid) {
            ok = false;
            break;
          }
          const double w = huber_weight(term.residual.squaredNorm(), opts.max_reprojection_px);
          H += w * term.J_point.transpose() * term.J_point;
          g += w * term.J_point.transpose() * term.residual;
        }
        if (!ok || H.determinant() <= 0.0) break;
        const Vec3 step = H.ldlt().solve(-g);
        X += step;
        if (step.norm() < 1e-12 * (1.0 + X.norm())) break;
      }
      std::vector<Observation> keep;
      for (const Observation& o : obs)
        if (reprojection_error(m, X, o) < opts.max_reprojection_px) keep.push_back(o);
      if (keep.size() == obs.size()) {
        ModelPoint p;
        p.xyz = X;
        p.track = static_cast<int>(t);
        p.obs = std::move(keep);
        made[t] = std::move(p);
        return;
      }
      obs = std::move(keep);
    }
  });
  int added = 0;
  for (auto& p : made)
    if (p) {
      m.points.push_back(std::move(*p));
      ++added;
    }
  return added;
}

/// Drops observations beyond the reprojection threshold (or behind the
/// camera) and points left with fewer than two observations.
inline int filter_model(SparseModel& m, double max_px) {
  int removed = 0;
  std::vector<ModelPoint> kept;
  kept.reserve(m.points.size());
  for (ModelPoint& p : m.points) {
    std::vector<Observation> obs;
    for (const Observation& o : p.obs)
      if (m.registered(o.image) && reprojection_error(m, p.xyz, o) <= max_px) obs.push_back(o);
    removed += static_cast<int>(p.obs.size() - obs.size());
    p.obs = std::move(obs);
    if (p.obs.size() >= 2) kept.push_back(std::move(p));
  }
  m.points = std::move(kept);
  m.stats = model_stats(m);
  return removed;
}

/// Per-triplet side-to-center distances of registered cameras.
inline std::vector<double> rig_baselines(const SparseModel& m, CameraId side) {
  std::map<int, std::array<int, 3>> by_triplet;
  for (std::size_t id = 0; id < m.images.size(); ++id) {
    const auto& im = m.images[id];
    if (!im.registered) continue;
    auto [it, ins] = by_triplet.try_emplace(im.triplet, std::array<int, 3>{-1, -1, -1});
    it->second[static_cast<std::size_t>(index_of(im.camera))] = static_cast<int>(id);
  }
  std::vector<double> out;
  for (const auto& [triplet, ids] : by_triplet) {
    const int s = ids[static_cast<std::size_t>(index_of(side))];
    if (s >= 0 && ids[1] >= 0) out.push_back((m.pose(s).center() - m.pose(ids[1]).center()).norm());
  }
  return out;
}

/// Rescales the model so the median side-to-center baseline matches the rig.
/// Returns the applied factor (1 when no triplet has a side and center camera).
inline double rescale_to_rig(SparseModel& m, const RigPrior& prior) {
  std::vector<double> ratios;
  for (double d : rig_baselines(m, CameraId::L)) ratios.push_back(prior.t_lc.norm() / d);
  for (double d : rig_baselines(m, CameraId::R)) ratios.push_back(prior.t_cr.norm() / d);
  if (ratios.empty()) return 1.0;
  const double s = detail::median(ratios);
  if (!(s > 0.0) || !std::isfinite(s)) return 1.0;
  for (auto& im : m.images) im.pose.translation *= s;
  for (auto& p : m.points) p.xyz *= s;
  return s;
}

struct SfmResult {
  SparseModel model;
  SeedCandidate seed;
  std::vector<std::pair<int, std::string>> failed;  // image id, reason
  std::vector<BundleReport> bundle_reports;
  bool converged = true;
  std::vector<std::string> warnings;
};

/// Unregistered, not yet failed image with the most 2D-3D correspondences.
inline std::optional<int> next_image(const SparseModel& m, const matching::TrackSet& ts,
                                     const std::vector<char>& excluded) {
  const auto tp = track_points(m, ts.tracks.size());
  std::vector<int> count(m.images.size(), 0);
  for (std::size_t t = 0; t < ts.tracks.size(); ++t) {
    if (tp[t] < 0) continue;
    for (const Observation& o : ts.tracks[t]) ++count[static_cast<std::size_t>(o.image)];
  }
  std::optional<int> best;
  for (std::size_t id = 0; id < m.images.size(); ++id) {
    if (m.images[id].registered || excluded[id] || count[id] == 0) continue;
    if (!best || count[id] > count[static_cast<std::size_t>(*best)]) best = static_cast<int>(id);
  }
  return best;
}

/// Registers the next best image; throws RegistrationFailed for it.
inline std::optional<int> register_next(SparseModel& m, const matching::TrackSet& ts, const SfmOptions& opts,
                                        const std::vector<char>& excluded) {
  const auto id = next_image(m, ts, excluded);
  if (!id) return std::nullopt;
  register_image(m, ts, *id, opts);
  return id;
}

/// Incremental reconstruction: seed pair, then resection and triangulation
/// image by image, with global rig-aware bundle adjustment whenever the
/// model has grown by `global_ba_growth`, and once more at the end.
inline SfmResult reconstruct(const matching::TrackSet& ts, const std::vector<std::string>& names,
                             const std::array<geometry::CameraIntrinsics, 3>& intr, const SfmOptions& opts) {
  opts.prior.validate();
  SfmResult res;
  res.model = initialize_pair(ts, names, intr, opts, &res.seed);
  SparseModel& m = res.model;
  auto global_ba = [&] {
    if (opts.prior.weight_t > 0.0) rescale_to_rig(m, opts.prior);
    res.bundle_reports.push_back(bundle_adjust(m, opts.prior, opts.ba));
    filter_model(m, opts.max_reprojection_px);
    triangulate_tracks(m, ts, opts);
  };
  global_ba();
  int last_ba = m.num_registered();
  std::vector<char> excluded(m.images.size(), 0);
  while (true) {
    std::optional<int> id;
    try {
      id = register_next(m, ts, opts, excluded);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::RegistrationFailed) throw;
      const auto bad = next_image(m, ts, excluded);
      excluded[static_cast<std::size_t>(*bad)] = 1;
      res.failed.push_back({*bad, e.what()});
      continue;
    }
    if (!id) break;
    triangulate_tracks(m, ts, opts);
    if (m.num_registered() >= opts.global_ba_growth * last_ba) {
      global_ba();
      last_ba = m.num_registered();
    }
  }
  global_ba();
  res.bundle_reports.push_back(bundle_adjust(m, opts.prior, opts.ba));
  for (const auto& r : res.bundle_reports) res.converged = res.converged && r.converged;
  if (!res.converged) res.warnings.push_back("bundle adjustment hit its iteration limit");
  for (std::size_t id = 0; id < m.images.size(); ++id)
    if (!m.images[id].registered && !excluded[id]) res.failed.push_back({static_cast<int>(id), "no correspondences"});
  check_model(m);
  m.stats = model_stats(m);
  return res;
}

}  // namespace rigrecon::sfm
