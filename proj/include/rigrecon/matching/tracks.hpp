#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/json_io.hpp"
#include "rigrecon/matching/matches.hpp"

namespace rigrecon::matching {

struct Observation {
  int image = 0;
  int keypoint = 0;

  bool operator==(const Observation& o) const { return image == o.image && keypoint == o.keypoint; }
};

using Track = std::vector<Observation>;

struct TrackSet {
  std::vector<std::vector<Keypoint>> keypoints;  // per image id
  std::vector<Track> tracks;
  std::map<std::pair<int, int>, int> pair_inliers;
  int conflicts_resolved = 0;

  double mean_track_length() const {
    if (tracks.empty()) return 0.0;
    double s = 0.0;
    for (const Track& t : tracks) s += static_cast<double>(t.size());
    return s / static_cast<double>(tracks.size());
  }
};

namespace detail {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

}  // namespace detail

/// Transitive closure of verified matches. A component holding two keypoints
/// of one image keeps the one with the highest match confidence (lowest
/// keypoint index on ties); tracks shorter than two are dropped.
inline TrackSet build_tracks(const std::vector<MatchSet>& verified, std::vector<std::vector<Keypoint>> keypoints) {
  TrackSet ts;
  ts.keypoints = std::move(keypoints);
  std::vector<int> base(ts.keypoints.size() + 1, 0);
  for (std::size_t i = 0; i < ts.keypoints.size(); ++i) base[i + 1] = base[i] + static_cast<int>(ts.keypoints[i].size());
  const auto node = [&](int image, int kp) {
    require(image >= 0 && image < static_cast<int>(ts.keypoints.size()) && kp >= 0 &&
                kp < static_cast<int>(ts.keypoints[image].size()),
            ErrorCode::IndexOutOfRange, "match refers to a missing keypoint");
    return base[image] + kp;
  };

  const auto total = static_cast<std::size_t>(base.back());
  detail::UnionFind uf(total);
  std::vector<double> confidence(total, -1.0);
  for (const MatchSet& s : verified) {
    ts.pair_inliers[{std::min(s.image_a, s.image_b), std::max(s.image_a, s.image_b)}] =
        static_cast<int>(s.matches.size());
    for (const Match& m : s.matches) {
      const int na = node(s.image_a, m.ia), nb = node(s.image_b, m.ib);
      uf.unite(na, nb);
      confidence[na] = std::max(confidence[na], m.confidence);
      confidence[nb] = std::max(confidence[nb], m.confidence);
    }
  }

  // Nodes grouped by root, in node order (image id, then keypoint).
  std::unordered_map<int, std::size_t> slot;
  std::vector<std::vector<int>> groups;
  for (int nd = 0; nd < static_cast<int>(total); ++nd) {
    if (confidence[nd] < 0.0) continue;
    const int root = uf.find(nd);
    auto [it, inserted] = slot.try_emplace(root, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(nd);
  }

  const auto image_of = [&](int nd) {
    return static_cast<int>(std::upper_bound(base.begin(), base.end(), nd) - base.begin()) - 1;
  };
  for (const auto& g : groups) {
    Track t;
    for (std::size_t k = 0; k < g.size();) {
      const int img = image_of(g[k]);
      std::size_t e = k, best = k;
      while (e < g.size() && image_of(g[e]) == img) {
        if (confidence[g[e]] > confidence[g[best]]) best = e;
        ++e;
      }
      ts.conflicts_resolved += static_cast<int>(e - k - 1);
      t.push_back({img, g[best] - base[img]});
      k = e;
    }
    if (t.size() >= 2) ts.tracks.push_back(std::move(t));
  }
  return ts;
}

/// Asserted invariant: no track observes an image twice, every track has >= 2 images.
inline void check_tracks(const TrackSet& ts) {
  for (const Track& t : ts.tracks) {
    require(t.size() >= 2, ErrorCode::StageFailed, "track with fewer than two observations");
    for (std::size_t i = 1; i < t.size(); ++i)
      require(t[i].image != t[i - 1].image, ErrorCode::StageFailed, "track observes an image twice");
  }
}

/// {keypoints: [[[u, v, score], ...] per image], tracks: [[[image, kp], ...]],
///  pair_inliers: [[a, b, n], ...], conflicts_resolved}
inline Json tracks_to_json(const TrackSet& ts) {
  Json kps = Json::array();
  for (const auto& image : ts.keypoints) {
    Json arr = Json::array();
    for (const Keypoint& k : image) arr.push_back({k.u, k.v, k.score});
    kps.push_back(std::move(arr));
  }
  Json tracks = Json::array();
  for (const Track& t : ts.tracks) {
    Json arr = Json::array();
    for (const Observation& o : t) arr.push_back({o.image, o.keypoint});
    tracks.push_back(std::move(arr));
  }
  Json inliers = Json::array();
  for (const auto& [pair, n] : ts.pair_inliers) inliers.push_back({pair.first, pair.second, n});
  return Json{{"keypoints", kps}, {"tracks", tracks}, {"pair_inliers", inliers},
              {"conflicts_resolved", ts.conflicts_resolved}, {"mean_track_length", ts.mean_track_length()}};
}

inline TrackSet tracks_from_json(const Json& doc) {
  TrackSet ts;
  for (const Json& image : json_get<Json>(doc, "keypoints")) {
    auto& out = ts.keypoints.emplace_back();
    for (const Json& k : image) {
      if (!k.is_array() || k.size() != 3) fail(ErrorCode::ParseError, "keypoint entries are [u, v, score]");
      out.push_back({k[0].get<double>(), k[1].get<double>(), k[2].get<double>()});
    }
  }
  for (const Json& t : json_get<Json>(doc, "tracks")) {
    Track track;
    for (const Json& o : t) {
      const Observation ob{o.at(0).get<int>(), o.at(1).get<int>()};
      require(ob.image >= 0 && ob.image < static_cast<int>(ts.keypoints.size()) && ob.keypoint >= 0 &&
                  ob.keypoint < static_cast<int>(ts.keypoints[static_cast<std::size_t>(ob.image)].size()),
              ErrorCode::IndexOutOfRange, "track observation outside the keypoint lists");
      track.push_back(ob);
    }
    ts.tracks.push_back(std::move(track));
  }
  for (const Json& p : json_get<Json>(doc, "pair_inliers"))
    ts.pair_inliers[{p.at(0).get<int>(), p.at(1).get<int>()}] = p.at(2).get<int>();
  ts.conflicts_resolved = json_get<int>(doc, "conflicts_resolved");
  check_tracks(ts);
  return ts;
}

}  // namespace rigrecon::matching
