#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/json_io.hpp"
#include "rigrecon/matching/pairs.hpp"

namespace rigrecon::matching {

/// Keypoint in rectified-image pixels.
struct Keypoint {
  double u = 0.0;
  double v = 0.0;
  double score = 0.0;

  bool operator==(const Keypoint& o) const { return u == o.u && v == o.v && score == o.score; }
};

struct Match {
  int ia = 0;
  int ib = 0;
  double confidence = 1.0;
};

/// Matches of one scheduled pair; images are dense ids (ImageKey::id()).
struct MatchSet {
  int image_a = 0;
  int image_b = 0;
  PairClass cls = PairClass::Intra;
  std::vector<Match> matches;
  double inlier_ratio = 1.0;
};

inline constexpr int kKeypointBudget = 8192;

/// Source of keypoints and putative matches, keyed by image name.
class MatchProvider {
 public:
  virtual ~MatchProvider() = default;
  virtual bool has_image(const std::string& name) const = 0;
  virtual std::vector<Keypoint> keypoints(const std::string& name) const = 0;
  /// Matches of the unordered pair {a, b}; `ia` indexes a's keypoints.
  virtual std::vector<Match> matches(const std::string& a, const std::string& b) const = 0;
};

/// Reads the per-pair interchange documents listed by a manifest
/// {"pairs": ["<file>", ...]} (paths relative to the manifest).
class FileMatchProvider final : public MatchProvider {
 public:
  explicit FileMatchProvider(const std::filesystem::path& manifest_path) {
    const Json manifest = read_json_file(manifest_path);
    const auto base = manifest_path.parent_path();
    for (const Json& entry : json_get<Json>(manifest, "pairs")) add_document(read_json_file(base / entry.get<std::string>()));
  }

  FileMatchProvider() = default;

  void add_document(const Json& doc) {
    const auto a = json_get<std::string>(doc, "image_a");
    const auto b = json_get<std::string>(doc, "image_b");
    register_keypoints(a, parse_keypoints(json_get<Json>(doc, "keypoints_a")));
    register_keypoints(b, parse_keypoints(json_get<Json>(doc, "keypoints_b")));
    std::vector<Match> ms;
    for (const Json& m : json_get<Json>(doc, "matches")) {
      if (!m.is_array() || m.size() != 3) fail(ErrorCode::ParseError, "match entries are [ia, ib, conf]");
      ms.push_back({m[0].get<int>(), m[1].get<int>(), m[2].get<double>()});
    }
    matches_[{a, b}] = std::move(ms);
  }

  bool has_image(const std::string& name) const override { return keypoints_.count(name) > 0; }

  std::vector<Keypoint> keypoints(const std::string& name) const override {
    auto it = keypoints_.find(name);
    if (it == keypoints_.end()) fail(ErrorCode::UnknownImage, "no keypoints for image '" + name + "'");
    return it->second;
  }

  std::vector<Match> matches(const std::string& a, const std::string& b) const override {
    if (auto it = matches_.find({a, b}); it != matches_.end()) return it->second;
    if (auto it = matches_.find({b, a}); it != matches_.end()) {
      std::vector<Match> swapped = it->second;
      for (Match& m : swapped) std::swap(m.ia, m.ib);
      return swapped;
    }
    return {};
  }

 private:
  static std::vector<Keypoint> parse_keypoints(const Json& arr) {
    std::vector<Keypoint> out;
    for (const Json& k : arr) {
      if (!k.is_array() || k.size() != 3) fail(ErrorCode::ParseError, "keypoint entries are [u, v, score]");
      out.push_back({k[0].get<double>(), k[1].get<double>(), k[2].get<double>()});
    }
    return out;
  }

  void register_keypoints(const std::string& name, const std::vector<Keypoint>& kps) {
    auto [it, inserted] = keypoints_.try_emplace(name, kps);
    if (!inserted && it->second != kps)
      fail(ErrorCode::ParseError, "documents disagree on the keypoints of '" + name + "'");
  }

  std::unordered_map<std::string, std::vector<Keypoint>> keypoints_;
  std::map<std::pair<std::string, std::string>, std::vector<Match>> matches_;
};

/// Keypoints per image id plus validated match sets for the scheduled pairs.
struct IngestedMatches {
  std::vector<std::vector<Keypoint>> keypoints;
  std::vector<MatchSet> sets;
};

namespace detail {

// Indices of the `budget` highest-score keypoints, original order kept.
inline std::vector<int> budget_keep(const std::vector<Keypoint>& kps, int budget) {
  std::vector<int> order(kps.size());
  std::iota(order.begin(), order.end(), 0);
  if (static_cast<int>(kps.size()) > budget) {
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return kps[x].score > kps[y].score; });
    order.resize(static_cast<std::size_t>(budget));
    std::sort(order.begin(), order.end());
  }
  return order;
}

}  // namespace detail

/// Pulls keypoints for every image in `names` (dense id -> name) and matches
/// for every scheduled pair. The keypoint budget keeps the highest scores;
/// matches touching a dropped keypoint are dropped with it.
inline IngestedMatches ingest_matches(const std::vector<ImagePair>& pairs, const std::vector<std::string>& names,
                                      const MatchProvider& provider, int budget = kKeypointBudget) {
  IngestedMatches out;
  out.keypoints.resize(names.size());
  std::vector<std::vector<int>> remap(names.size());
  std::vector<std::size_t> raw_count(names.size(), 0);
  std::vector<char> loaded(names.size(), 0);
  auto load = [&](int id) {
    if (id < 0 || id >= static_cast<int>(names.size()))
      fail(ErrorCode::UnknownImage, "image id " + std::to_string(id) + " outside the selected set");
    if (loaded[id]) return;
    if (!provider.has_image(names[id])) fail(ErrorCode::UnknownImage, "provider has no image '" + names[id] + "'");
    const auto raw = provider.keypoints(names[id]);
    raw_count[id] = raw.size();
    const auto keep = detail::budget_keep(raw, budget);
    remap[id].assign(raw.size(), -1);
    for (std::size_t k = 0; k < keep.size(); ++k) {
      remap[id][keep[k]] = static_cast<int>(k);
      out.keypoints[id].push_back(raw[keep[k]]);
    }
    loaded[id] = 1;
  };

  for (const ImagePair& p : pairs) {
    const int a = p.a.id(), b = p.b.id();
    load(a);
    load(b);
    MatchSet set;
    set.image_a = a;
    set.image_b = b;
    set.cls = p.cls;
    std::set<int> used_a, used_b;
    for (const Match& m : provider.matches(names[a], names[b])) {
      if (m.ia < 0 || m.ib < 0 || static_cast<std::size_t>(m.ia) >= raw_count[a] ||
          static_cast<std::size_t>(m.ib) >= raw_count[b])
        fail(ErrorCode::IndexOutOfRange, "match (" + std::to_string(m.ia) + ", " + std::to_string(m.ib) +
                                             ") outside keypoint lists of " + names[a] + " / " + names[b]);
      if (!used_a.insert(m.ia).second || !used_b.insert(m.ib).second)
        fail(ErrorCode::DuplicateMatch, "keypoint matched twice in pair " + names[a] + " / " + names[b]);
      if (!(m.confidence >= 0.0 && m.confidence <= 1.0))
        fail(ErrorCode::ParseError, "match confidence outside [0, 1]");
      const int ra = remap[a][m.ia], rb = remap[b][m.ib];
      if (ra >= 0 && rb >= 0) set.matches.push_back({ra, rb, m.confidence});
    }
    out.sets.push_back(std::move(set));
  }
  return out;
}

/// One interchange document for a pair.
inline Json match_document(const std::string& name_a, const std::string& name_b, const std::vector<Keypoint>& ka,
                           const std::vector<Keypoint>& kb, const std::vector<Match>& matches) {
  auto kp_json = [](const std::vector<Keypoint>& kps) {
    Json arr = Json::array();
    for (const Keypoint& k : kps) arr.push_back({k.u, k.v, k.score});
    return arr;
  };
  Json ms = Json::array();
  for (const Match& m : matches) ms.push_back({m.ia, m.ib, m.confidence});
  return Json{{"image_a", name_a}, {"image_b", name_b}, {"keypoints_a", kp_json(ka)}, {"keypoints_b", kp_json(kb)},
              {"matches", ms}};
}

}  // namespace rigrecon::matching
