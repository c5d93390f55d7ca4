#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "rigrecon/geometry/epipolar.hpp"
#include "rigrecon/imaging/filters.hpp"
#include "rigrecon/matching/matches.hpp"
#include "rigrecon/matching/pairs.hpp"
#include "rigrecon/matching/tracks.hpp"
#include "rigrecon/matching/triplets.hpp"
#include "rigrecon/matching/verify.hpp"
#include "rigrecon/synth/rig_scenario.hpp"
#include "rigrecon/synth/texture.hpp"
#include "test_support.hpp"

namespace rigrecon::matching {
namespace {

using geometry::Vec2;
using geometry::Vec3;
using testing::make_two_view;
using testing::TwoView;

std::vector<FrameTriplet> scored(const std::vector<double>& scores) {
  std::vector<FrameTriplet> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    FrameTriplet t;
    t.index = static_cast<int>(i);
    t.score = scores[i];
    out.push_back(t);
  }
  return out;
}

TEST(SelectTriplets, AllWhenKEqualsLength) {
  const auto sel = select_triplets(scored({3, 1, 2, 5, 4}), 5);
  ASSERT_EQ(sel.size(), 5u);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(sel[i].index, i);
}

TEST(SelectTriplets, ConstructedBins) {
  const auto sel = select_triplets(scored({1, 2, 1, 9, 0, 3, 1, 2, 4, 8}), 2);
  ASSERT_EQ(sel.size(), 2u);
  EXPECT_EQ(sel[0].index, 3);
  EXPECT_EQ(sel[1].index, 9);
}

TEST(SelectTriplets, InsufficientFrames) {
  try {
    select_triplets(scored({1, 2}), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InsufficientFrames);
  }
}

TEST(SelectTriplets, AvoidsBlurredTripletsAndIgnoresBrightness) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = 200, k = 50;
  std::vector<char> blurred(n);
  std::map<std::string, imaging::Image> frames, brighter;
  std::vector<FrameTriplet> cands;
  for (int i = 0; i < n; ++i) {
    blurred[i] = u(rng) < 0.3;
    FrameTriplet t;
    t.index = i;
    for (int c = 0; c < 3; ++c) {
      const synth::ValueNoise tex(1000 + 3 * i + c, 6.0);
      imaging::Image img(48, 40, 1);
      for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 48; ++x) img.at(x, y) = 0.8 * tex(x, y);
      if (blurred[i]) img = imaging::gaussian_blur(img, 3.0);
      t.frames[c] = std::to_string(i) + "_" + std::to_string(c);
      frames[t.frames[c]] = img;
      for (double& v : img.data) v += 0.1;
      brighter[t.frames[c]] = img;
    }
    cands.push_back(t);
  }
  auto a = cands, b = cands;
  score_triplets(a, [&](const std::string& name) { return frames.at(name); });
  score_triplets(b, [&](const std::string& name) { return brighter.at(name); });
  const auto sel = select_triplets(a, k);
  const auto sel_b = select_triplets(b, k);
  int sharp = 0;
  for (std::size_t i = 0; i < sel.size(); ++i) {
    sharp += !blurred[sel[i].index];
    EXPECT_EQ(sel[i].index, sel_b[i].index);
  }
  EXPECT_GE(sharp, 0.95 * k);
}

// Independent oracle: test every unordered pair of images against the class rules.
std::set<std::pair<int, int>> brute_force_schedule(int n, int w) {
  std::set<std::pair<int, int>> out;
  for (int a = 0; a < 3 * n; ++a)
    for (int b = a + 1; b < 3 * n; ++b) {
      const auto ka = ImageKey::from_id(a), kb = ImageKey::from_id(b);
      const int d = std::abs(ka.index - kb.index);
      if (d > w) continue;
      const bool intra = ka.camera == kb.camera && d > 0;
      const std::set<CameraId> cams{ka.camera, kb.camera};
      const bool lc = cams == std::set<CameraId>{CameraId::L, CameraId::C};
      const bool cr = cams == std::set<CameraId>{CameraId::C, CameraId::R};
      if (intra || lc || cr) out.insert({a, b});
    }
  return out;
}

long long closed_form(long long n, long long w) {
  long long s = 0;
  for (long long d = 1; d <= w; ++d) s += std::max(0LL, n - d);
  return 3 * s + 2 * (n + 2 * s);
}

TEST(SchedulePairs, SingleTriplet) {
  const auto pairs = schedule_pairs(1, 5);
  ASSERT_EQ(pairs.size(), 2u);
  EXPECT_EQ(pairs[0].cls, PairClass::CrossLC);
  EXPECT_EQ(pairs[1].cls, PairClass::CrossCR);
}

TEST(SchedulePairs, IntraCountAtMiddleIndex) {
  int count = 0;
  for (const auto& p : schedule_pairs(11, 5))
    if (p.cls == PairClass::Intra && p.a.camera == CameraId::C && (p.a.index == 5 || p.b.index == 5)) ++count;
  EXPECT_EQ(count, 10);
}

TEST(SchedulePairs, MatchesEnumerationAndClosedForm) {
  for (int n : {0, 1, 2, 3, 7, 11, 40, 250})
    for (int w : {0, 1, 2, 5, 9}) {
      const auto pairs = schedule_pairs(n, w);
      std::set<std::pair<int, int>> got;
      for (const auto& p : pairs) {
        EXPECT_NE(classify(p.a, p.b), PairClass::CrossLR);
        EXPECT_EQ(classify(p.a, p.b), p.cls);
        EXPECT_LE(std::abs(p.a.index - p.b.index), w);
        const int a = p.a.id(), b = p.b.id();
        EXPECT_NE(a, b);
        EXPECT_TRUE(got.insert({std::min(a, b), std::max(a, b)}).second) << "duplicate pair";
      }
      EXPECT_EQ(static_cast<long long>(pairs.size()), closed_form(n, w)) << n << " " << w;
      if (n <= 40) {
        EXPECT_EQ(got, brute_force_schedule(n, w));
      }
    }
}

TEST(SchedulePairs, AblationIncludesLeftRightAndCaps) {
  const auto pairs = schedule_all_pairs(50, 2000);
  EXPECT_EQ(pairs.size(), 2000u);
  int lr = 0;
  for (const auto& p : pairs) lr += p.cls == PairClass::CrossLR;
  EXPECT_GT(lr, 0);
  EXPECT_EQ(schedule_all_pairs(3, 100000).size(), 9u * 8u / 2u);
}

FileMatchProvider two_image_provider(const Json& matches) {
  FileMatchProvider fp;
  fp.add_document(Json{{"image_a", "a"},
                       {"image_b", "b"},
                       {"keypoints_a", {{1.0, 2.0, 0.9}, {3.0, 4.0, 0.8}}},
                       {"keypoints_b", {{5.0, 6.0, 0.7}, {7.0, 8.0, 0.6}}},
                       {"matches", matches}});
  return fp;
}

const std::vector<ImagePair> kOnePair = {{{CameraId::L, 0}, {CameraId::C, 0}, PairClass::CrossLC}};
const std::vector<std::string> kNames = {"a", "b", "unused"};

TEST(Ingest, EmptyMatchesAccepted) {
  const auto got = ingest_matches(kOnePair, kNames, two_image_provider(Json::array()));
  ASSERT_EQ(got.sets.size(), 1u);
  EXPECT_TRUE(got.sets[0].matches.empty());
  EXPECT_EQ(got.keypoints[0].size(), 2u);
}

TEST(Ingest, ValidationErrors) {
  auto code = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  EXPECT_EQ(code([] { ingest_matches(kOnePair, kNames, two_image_provider(Json{{0, 2, 1.0}})); }),
            ErrorCode::IndexOutOfRange);
  EXPECT_EQ(code([] { ingest_matches(kOnePair, kNames, two_image_provider(Json{{0, 0, 1.0}, {0, 1, 1.0}})); }),
            ErrorCode::DuplicateMatch);
  EXPECT_EQ(code([] { ingest_matches(kOnePair, {"a", "zzz"}, two_image_provider(Json::array())); }),
            ErrorCode::UnknownImage);
  FileMatchProvider fp = two_image_provider(Json::array());
  EXPECT_EQ(code([&] {
              fp.add_document(Json{{"image_a", "a"}, {"image_b", "c"}, {"keypoints_a", Json::array()},
                                   {"keypoints_b", Json::array()}, {"matches", Json::array()}});
            }),
            ErrorCode::ParseError);
}

TEST(Ingest, SwappedDocumentAndBudget) {
  FileMatchProvider fp;
  fp.add_document(Json{{"image_a", "b"},
                       {"image_b", "a"},
                       {"keypoints_a", {{0, 0, 0.1}, {1, 1, 0.9}, {2, 2, 0.5}}},
                       {"keypoints_b", {{5, 5, 0.3}, {6, 6, 0.4}}},
                       {"matches", {{0, 0, 0.5}, {1, 1, 0.7}, {2, 0, 0.2}}}});
  // Wrong on purpose: b's keypoint 2 is matched to a's keypoint 0 twice.
  EXPECT_THROW(ingest_matches(kOnePair, kNames, fp), Error);

  FileMatchProvider ok;
  ok.add_document(Json{{"image_a", "b"},
                       {"image_b", "a"},
                       {"keypoints_a", {{0, 0, 0.1}, {1, 1, 0.9}, {2, 2, 0.5}}},
                       {"keypoints_b", {{5, 5, 0.3}, {6, 6, 0.4}}},
                       {"matches", {{0, 0, 0.5}, {1, 1, 0.7}}}});
  const auto got = ingest_matches(kOnePair, kNames, ok, /*budget=*/2);
  // Image "b" keeps keypoints 1 and 2 (scores 0.9, 0.5); the match on keypoint 0 is dropped.
  ASSERT_EQ(got.keypoints[1].size(), 2u);
  EXPECT_EQ(got.keypoints[1][0].u, 1.0);
  ASSERT_EQ(got.sets[0].matches.size(), 1u);
  EXPECT_EQ(got.sets[0].matches[0].ia, 1);  // a's keypoint 1
  EXPECT_EQ(got.sets[0].matches[0].ib, 0);  // b's keypoint 1, now index 0
}

TEST(Ingest, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "rigrecon_match_files";
  std::filesystem::create_directories(dir);
  write_json_file(dir / "p0.json", match_document("a", "b", {{1, 2, 0.5}}, {{3, 4, 0.5}}, {{0, 0, 0.75}}));
  write_json_file(dir / "manifest.json", Json{{"pairs", {"p0.json"}}});
  const FileMatchProvider fp(dir / "manifest.json");
  const auto got = ingest_matches(kOnePair, kNames, fp);
  ASSERT_EQ(got.sets[0].matches.size(), 1u);
  EXPECT_EQ(got.sets[0].matches[0].confidence, 0.75);
  EXPECT_EQ(got.keypoints[1][0].v, 4.0);
  std::filesystem::remove_all(dir);
}

TEST(EightPoint, ExactDataRecoversEssential) {
  std::mt19937_64 rng(20);
  const TwoView tv = make_two_view(rng, 30, 0.0, 0.0);
  std::vector<Vec2> xa, xb;
  std::vector<int> idx;
  for (std::size_t i = 0; i < tv.ka.size(); ++i) {
    xa.push_back(tv.intr.to_normalized({tv.ka[i].u, tv.ka[i].v}));
    xb.push_back(tv.intr.to_normalized({tv.kb[i].u, tv.kb[i].v}));
    idx.push_back(static_cast<int>(i));
  }
  geometry::Mat3 truth = geometry::skew(tv.pose_b.translation) * tv.pose_b.rotation_matrix();
  truth /= truth.norm();
  geometry::Mat3 E = geometry::essential_eight_point(xa, xb, idx);
  if (E.cwiseProduct(truth).sum() < 0) E = -E;
  EXPECT_LT((E - truth).norm(), 1e-9);
  for (std::size_t i = 0; i < xa.size(); ++i) EXPECT_NEAR(xb[i].homogeneous().dot(E * xa[i].homogeneous()), 0.0, 1e-12);
}

TEST(VerifyPair, NoiseFreeAllInliers) {
  std::mt19937_64 rng(21);
  const TwoView tv = make_two_view(rng, 100, 0.0, 0.0);
  const auto v = verify_pair(tv.set, tv.ka, tv.kb, tv.intr, tv.intr, {}, 1);
  EXPECT_TRUE(v.kept);
  EXPECT_EQ(v.inliers.matches.size(), 100u);
  EXPECT_DOUBLE_EQ(v.inliers.inlier_ratio, 1.0);
}

TEST(VerifyPair, TooFewMatches) {
  std::mt19937_64 rng(22);
  TwoView tv = make_two_view(rng, 7, 0.0, 0.0);
  try {
    verify_pair(tv.set, tv.ka, tv.kb, tv.intr, tv.intr, {}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewMatches);
  }
}

TEST(VerifyPair, FewInliersDiscarded) {
  std::mt19937_64 rng(23);
  const TwoView tv = make_two_view(rng, 12, 0.0, 0.0);
  const auto v = verify_pair(tv.set, tv.ka, tv.kb, tv.intr, tv.intr, {}, 1);
  EXPECT_FALSE(v.kept);
  EXPECT_EQ(v.reason, "TooFewInliers");
}

TEST(VerifyPair, OutlierPrecisionRecallAndEpipolarInvariant) {
  std::mt19937_64 rng(24);
  long tp = 0, fp = 0, fn = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const TwoView tv = make_two_view(rng, 300, 0.3, 0.5);
    const auto v = verify_pair(tv.set, tv.ka, tv.kb, tv.intr, tv.intr, {}, 100 + trial);
    const geometry::Mat3 F = geometry::fundamental_from_essential(v.essential, tv.intr, tv.intr);
    for (std::size_t i = 0; i < tv.is_outlier.size(); ++i) {
      const bool in = v.inlier_mask[i];
      tp += in && !tv.is_outlier[i];
      fp += in && tv.is_outlier[i];
      fn += !in && !tv.is_outlier[i];
      if (in) {
        EXPECT_LT(geometry::sampson_distance(F, {tv.ka[i].u, tv.ka[i].v}, {tv.kb[i].u, tv.kb[i].v}), 2.0);
      }
    }
  }
  EXPECT_GE(static_cast<double>(tp) / (tp + fp), 0.99);
  EXPECT_GE(static_cast<double>(tp) / (tp + fn), 0.99);
}

TEST(VerifyPair, SeededRunsAreIdentical) {
  std::mt19937_64 rng(25);
  const TwoView tv = make_two_view(rng, 200, 0.3, 0.5);
  const auto a = verify_pair(tv.set, tv.ka, tv.kb, tv.intr, tv.intr, {}, 7);
  const auto b = verify_pair(tv.set, tv.ka, tv.kb, tv.intr, tv.intr, {}, 7);
  EXPECT_EQ(a.inlier_mask, b.inlier_mask);
  EXPECT_EQ(a.essential, b.essential);
}

TEST(VerifyPair, TrialCountForTinyInlierFractions) {
  EXPECT_EQ(detail::ransac_trials_needed(1.0, 0.9999, 8), 1);
  EXPECT_EQ(detail::ransac_trials_needed(1.0 / 300.0, 0.9999, 8), std::numeric_limits<int>::max());
  // Closed form: ceil(log(1e-4) / log(1 - 0.5^8)) = 2354.
  EXPECT_EQ(detail::ransac_trials_needed(0.5, 0.9999, 8), 2354);
}

TEST(BuildTracks, SinglePair) {
  MatchSet s;
  s.image_a = 0;
  s.image_b = 1;
  for (int i = 0; i < 10; ++i) s.matches.push_back({i, 9 - i, 1.0});
  const auto ts = build_tracks({s}, {std::vector<Keypoint>(10), std::vector<Keypoint>(10)});
  ASSERT_EQ(ts.tracks.size(), 10u);
  for (const auto& t : ts.tracks) EXPECT_EQ(t.size(), 2u);
  EXPECT_DOUBLE_EQ(ts.mean_track_length(), 2.0);
}

TEST(BuildTracks, ChainAndConflict) {
  MatchSet ab{0, 1, PairClass::Intra, {{0, 0, 1.0}, {1, 1, 1.0}}, 1.0};
  MatchSet bc{1, 2, PairClass::Intra, {{0, 0, 1.0}, {1, 1, 1.0}}, 1.0};
  // Closes a loop onto a different keypoint of image 0 with lower confidence.
  MatchSet ca{2, 0, PairClass::Intra, {{0, 2, 0.4}}, 1.0};
  const auto ts = build_tracks({ab, bc, ca}, {std::vector<Keypoint>(3), std::vector<Keypoint>(2), std::vector<Keypoint>(2)});
  check_tracks(ts);
  ASSERT_EQ(ts.tracks.size(), 2u);
  EXPECT_EQ(ts.tracks[0].size(), 3u);
  EXPECT_EQ(ts.tracks[0][0], (Observation{0, 0}));
  EXPECT_EQ(ts.tracks[1].size(), 3u);
  EXPECT_EQ(ts.conflicts_resolved, 1);
}

TEST(BuildTracks, JsonRoundTrip) {
  MatchSet ab{0, 1, PairClass::CrossLC, {{0, 1, 0.9}, {1, 0, 0.5}}, 1.0};
  const auto ts = build_tracks({ab}, {{{1.5, 2.0, 0.3}, {4.0, 5.0, 0.7}}, {{7.0, 8.0, 1.0}, {9.5, 0.25, 0.1}}});
  const auto back = tracks_from_json(tracks_to_json(ts));
  EXPECT_EQ(back.keypoints, ts.keypoints);
  EXPECT_EQ(back.tracks, ts.tracks);
  EXPECT_EQ(back.pair_inliers, ts.pair_inliers);
  Json bad = tracks_to_json(ts);
  bad["tracks"][0][0][1] = 5;
  EXPECT_THROW(tracks_from_json(bad), Error);
}

TEST(SyntheticProvider, MatchesEqualGroundTruthAndTrackLength) {
  synth::RigScenario sc;
  sc.num_points = 800;
  sc.pixel_noise = 0.3;
  const auto truth = synth::generate_tracks(sc, 12, 5);
  const synth::SyntheticMatchProvider provider(truth);
  const auto pairs = schedule_pairs(12, 5);
  const auto ing = ingest_matches(pairs, truth.names, provider);
  for (const MatchSet& s : ing.sets)
    for (const Match& m : s.matches)
      EXPECT_EQ(truth.keypoint_point[s.image_a][m.ia], truth.keypoint_point[s.image_b][m.ib]);
  // Every ground-truth co-observation of a scheduled pair appears.
  std::size_t expected = 0, got = 0;
  for (const MatchSet& s : ing.sets) {
    got += s.matches.size();
    std::set<int> pa(truth.keypoint_point[s.image_a].begin(), truth.keypoint_point[s.image_a].end());
    for (int p : truth.keypoint_point[s.image_b]) expected += pa.count(p);
  }
  EXPECT_EQ(got, expected);

  std::array<geometry::CameraIntrinsics, 3> intr{truth.rectified(0), truth.rectified(1), truth.rectified(2)};
  const auto ver = verify_all(ing.sets, ing.keypoints, intr, {}, 9);
  const auto ts = build_tracks(ver.kept, ing.keypoints);
  check_tracks(ts);
  EXPECT_NEAR(ts.mean_track_length(), truth.tracks.mean_track_length(), 0.1 * truth.tracks.mean_track_length());
}

Vec2 true_projection(const synth::SyntheticTracks& t, int image, int point) {
  const Vec3 Xc = t.poses[static_cast<std::size_t>(image)].apply(t.points[static_cast<std::size_t>(point)]);
  return t.rectified(image).to_pixel({Xc.x() / Xc.z(), Xc.y() / Xc.z()});
}

double mean_observation_error(const synth::SyntheticTracks& t) {
  double sum = 0.0;
  long n = 0;
  for (int id = 0; id < t.num_images(); ++id)
    for (std::size_t k = 0; k < t.keypoint_point[id].size(); ++k) {
      const Keypoint& kp = t.tracks.keypoints[id][k];
      sum += (Vec2(kp.u, kp.v) - true_projection(t, id, t.keypoint_point[id][k])).norm();
      ++n;
    }
  return sum / static_cast<double>(n);
}

TEST(SyntheticTracks, ZeroNoiseProjectsExactly) {
  synth::RigScenario sc;
  sc.num_points = 400;
  const auto t = synth::generate_tracks(sc, 8, 1);
  EXPECT_LT(mean_observation_error(t), 1e-9);
  EXPECT_EQ(t.points.size(), 400u);
  for (const auto& track : t.tracks.tracks) EXPECT_GE(track.size(), 2u);
}

TEST(SyntheticTracks, NoiseMatchesRayleighMean) {
  synth::RigScenario sc;
  sc.num_points = 1500;
  sc.pixel_noise = 0.5;
  const auto t = synth::generate_tracks(sc, 10, 2);
  // Isotropic Gaussian with 2D RMS s: mean radial error s * sqrt(pi) / 2.
  EXPECT_NEAR(mean_observation_error(t), 0.5 * std::sqrt(M_PI) / 2.0, 0.05 * 0.5 * std::sqrt(M_PI) / 2.0);
}

TEST(SyntheticTracks, SeedDeterminesOutput) {
  synth::RigScenario sc;
  sc.num_points = 300;
  sc.pixel_noise = 0.3;
  const auto a = synth::generate_tracks(sc, 6, 11), b = synth::generate_tracks(sc, 6, 11),
             c = synth::generate_tracks(sc, 6, 12);
  EXPECT_EQ(a.tracks.keypoints, b.tracks.keypoints);
  EXPECT_NE(a.tracks.keypoints, c.tracks.keypoints);
}

TEST(SyntheticTracks, RigGeometryHolds) {
  synth::RigScenario sc;
  sc.num_points = 50;
  const auto t = synth::generate_tracks(sc, 5, 3);
  for (int i = 0; i < 5; ++i) {
    const auto& pc = t.poses[3 * i + 1];
    const Vec3 l_in_c = pc.apply(t.poses[3 * i].center());
    const Vec3 r_in_c = pc.apply(t.poses[3 * i + 2].center());
    EXPECT_LT((l_in_c - sc.t_lc).norm(), 1e-12);
    EXPECT_LT((r_in_c - sc.t_cr).norm(), 1e-12);
  }
  EXPECT_NEAR(t.trajectory_length(), 4 * sc.triplet_spacing(), 0.05 * 4 * sc.triplet_spacing());
}

}  // namespace
}  // namespace rigrecon::matching
