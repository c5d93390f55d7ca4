#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/json_io.hpp"
#include "rigrecon/core/parallel.hpp"
#include "rigrecon/core/types.hpp"
#include "rigrecon/imaging/filters.hpp"
#include "rigrecon/imaging/phase_correlation.hpp"

namespace rigrecon::sync {

using imaging::Image;

/// Per-stream vertical motion: shifts[i] is the displacement from frame i to
/// frame i + 1, so an N-frame stream has N - 1 entries.
struct ShiftSignal {
  CameraId camera = CameraId::C;
  double fps = 120.0;
  std::vector<double> shifts;
  int degenerate_pairs = 0;

  int frame_count() const { return static_cast<int>(shifts.size()) + 1; }
};

struct PreprocessConfig {
  double blur_sigma = 1.5;
  int clahe_tiles = 8;
  double clahe_clip = 2.0;
};

/// blur -> CLAHE -> Laplacian, on the luma channel.
inline Image preprocess(const Image& frame, const PreprocessConfig& cfg) {
  return imaging::laplacian(
      imaging::clahe(imaging::gaussian_blur(imaging::to_gray(frame), cfg.blur_sigma), cfg.clahe_tiles, cfg.clahe_clip));
}

/// Random-access frame provider so long videos need not sit in memory.
struct FrameSource {
  int count = 0;
  std::function<Image(int)> load;
};

inline FrameSource frames_from_vector(const std::vector<Image>& frames) {
  return {static_cast<int>(frames.size()), [&frames](int i) { return frames[static_cast<std::size_t>(i)]; }};
}

inline ShiftSignal build_shift_signal(const FrameSource& source, CameraId camera, const PreprocessConfig& cfg = {},
                                      double fps = 120.0) {
  require(source.count >= 2, ErrorCode::TooFewFrames, "shift signal needs at least two frames");
  ShiftSignal sig;
  sig.camera = camera;
  sig.fps = fps;
  sig.shifts.assign(static_cast<std::size_t>(source.count - 1), 0.0);

  // Frames are preprocessed in blocks; the last frame of a block is carried
  // into the next so each frame is processed once.
  constexpr int kBlock = 64;
  std::vector<Image> block;
  std::vector<char> degenerate(sig.shifts.size(), 0);
  int width = -1, height = -1;
  for (int start = 0; start < source.count - 1; start += kBlock) {
    const int end = std::min(source.count - 1, start + kBlock);
    std::vector<Image> pre(static_cast<std::size_t>(end - start + 1));
    const std::size_t first_new = block.empty() ? 0 : 1;
    if (!block.empty()) pre[0] = std::move(block.back());
    parallel_for(pre.size() - first_new, [&](std::size_t k) {
      pre[k + first_new] = preprocess(source.load(start + static_cast<int>(k + first_new)), cfg);
    });
    for (const Image& p : pre) {
      if (width < 0) {
        width = p.width;
        height = p.height;
      }
      require(p.width == width && p.height == height, ErrorCode::InvalidArgument,
              "frames in a stream must share dimensions");
    }
    parallel_for(static_cast<std::size_t>(end - start), [&](std::size_t k) {
      const std::size_t i = start + k;
      try {
        sig.shifts[i] = imaging::phase_correlate_vertical(pre[k], pre[k + 1]);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateSpectrum) throw;
        sig.shifts[i] = 0.0;
        degenerate[i] = 1;
      }
    });
    block = std::move(pre);
  }
  for (char d : degenerate) sig.degenerate_pairs += d;
  return sig;
}

inline ShiftSignal build_shift_signal(const std::vector<Image>& frames, CameraId camera,
                                      const PreprocessConfig& cfg = {}, double fps = 120.0) {
  return build_shift_signal(frames_from_vector(frames), camera, cfg, fps);
}

/// Range of i with both a[i] and b[i + offset] defined.
struct Overlap {
  int begin = 0;
  int end = 0;
  int size() const { return std::max(0, end - begin); }
};

inline Overlap overlap(std::size_t na, std::size_t nb, int offset) {
  return {std::max(0, -offset), std::min(static_cast<int>(na), static_cast<int>(nb) - offset)};
}

/// Mean |a[i] - b[i + offset]| over the overlap; positive offset means b is
/// delayed relative to a.
inline double l1_alignment_loss(const ShiftSignal& a, const ShiftSignal& b, int offset) {
  const Overlap ov = overlap(a.shifts.size(), b.shifts.size(), offset);
  if (ov.size() < 1) fail(ErrorCode::NoOverlap, "offset " + std::to_string(offset) + " leaves no overlap");
  double sum = 0.0;
  for (int i = ov.begin; i < ov.end; ++i) sum += std::abs(a.shifts[i] - b.shifts[i + offset]);
  return sum / ov.size();
}

struct SearchOptions {
  bool verify_exhaustive = false;
  double verify_tolerance = 0.01;
};

struct OffsetResult {
  int offset = 0;
  double loss = 0.0;
  int evaluations = 0;
  bool used_exhaustive = false;
  std::vector<std::string> warnings;
};

namespace detail {

// Strict ordering used for every comparison: lower loss, then smaller
// |offset|, then the negative offset.
inline bool better(double loss_a, int off_a, double loss_b, int off_b) {
  if (loss_a != loss_b) return loss_a < loss_b;
  if (std::abs(off_a) != std::abs(off_b)) return std::abs(off_a) < std::abs(off_b);
  return off_a < off_b;
}

struct SearchRange {
  int lo, hi;
};

inline SearchRange search_range(const ShiftSignal& a, const ShiftSignal& b, int bound) {
  require(bound >= 1, ErrorCode::InvalidArgument, "sync search bound must be >= 1");
  require(!a.shifts.empty() && !b.shifts.empty(), ErrorCode::NoOverlap, "empty shift signal");
  // Offsets beyond these leave no overlapping entries.
  const int lo = std::max(-bound, -(static_cast<int>(a.shifts.size()) - 1));
  const int hi = std::min(bound, static_cast<int>(b.shifts.size()) - 1);
  if (lo > hi) fail(ErrorCode::NoOverlap, "no offset within the bound overlaps");
  return {lo, hi};
}

}  // namespace detail

/// Brute-force scan of every integer offset in [-bound, bound].
inline OffsetResult exhaustive_offset(const ShiftSignal& a, const ShiftSignal& b, int bound) {
  const auto range = detail::search_range(a, b, bound);
  OffsetResult r;
  r.loss = std::numeric_limits<double>::infinity();
  for (int o = range.lo; o <= range.hi; ++o) {
    const double loss = l1_alignment_loss(a, b, o);
    ++r.evaluations;
    if (r.evaluations == 1 || detail::better(loss, o, r.loss, r.offset)) {
      r.loss = loss;
      r.offset = o;
    }
  }
  r.used_exhaustive = true;
  return r;
}

/// Coarse-to-fine search: a grid of at most 21 probes over the bracket, then
/// the bracket shrinks to the neighbours of the best probe; stops once the
/// stride reaches one. Exact whenever the loss is unimodal in the offset.
inline OffsetResult find_offset(const ShiftSignal& a, const ShiftSignal& b, int bound,
                                const SearchOptions& opts = {}) {
  auto range = detail::search_range(a, b, bound);
  std::map<int, double> memo;
  auto eval = [&](int o) {
    auto it = memo.find(o);
    if (it != memo.end()) return it->second;
    const double loss = l1_alignment_loss(a, b, o);
    memo.emplace(o, loss);
    return loss;
  };

  int best = range.lo;
  double best_loss = eval(best);
  while (true) {
    const int span = range.hi - range.lo;
    const int stride = std::max(1, (span + 19) / 20);
    for (int o = range.lo; o <= range.hi; o += stride) {
      const double loss = eval(o);
      if (detail::better(loss, o, best_loss, best)) {
        best = o;
        best_loss = loss;
      }
    }
    if (stride == 1) break;
    range = {std::max(range.lo, best - stride), std::min(range.hi, best + stride)};
  }

  OffsetResult r;
  r.offset = best;
  r.loss = best_loss;
  r.evaluations = static_cast<int>(memo.size());
  if (opts.verify_exhaustive) {
    const OffsetResult full = exhaustive_offset(a, b, bound);
    if (full.loss < best_loss * (1.0 - opts.verify_tolerance)) {
      r.warnings.push_back("coarse-to-fine search stopped at offset " + std::to_string(best) + " (loss " +
                           std::to_string(best_loss) + "); exhaustive scan found " + std::to_string(full.offset) +
                           " (loss " + std::to_string(full.loss) + ")");
      r.offset = full.offset;
      r.loss = full.loss;
      r.used_exhaustive = true;
    }
  }
  return r;
}

/// Alignment of the three streams against the center camera. Aligned triplet
/// k uses frames start_left + k, start_center + k and start_right + k.
struct SyncResult {
  int offset_left = 0;
  int offset_right = 0;
  int trimmed_length = 0;
  double residual_l1_left = 0.0;
  double residual_l1_right = 0.0;
  double presync_l1_left = 0.0;
  double presync_l1_right = 0.0;
  int start_left = 0;
  int start_center = 0;
  int start_right = 0;
  int evaluations = 0;
  std::vector<std::string> warnings;
};

inline SyncResult synchronize_three(const ShiftSignal& l, const ShiftSignal& c, const ShiftSignal& r, int bound,
                                    const SearchOptions& opts = {}) {
  require(!l.shifts.empty() && !c.shifts.empty() && !r.shifts.empty(), ErrorCode::NoOverlap,
          "empty shift signal");
  const OffsetResult left = find_offset(c, l, bound, opts);
  const OffsetResult right = find_offset(c, r, bound, opts);
  SyncResult s;
  s.offset_left = left.offset;
  s.offset_right = right.offset;
  s.residual_l1_left = left.loss;
  s.residual_l1_right = right.loss;
  s.presync_l1_left = l1_alignment_loss(c, l, 0);
  s.presync_l1_right = l1_alignment_loss(c, r, 0);
  s.evaluations = left.evaluations + right.evaluations;
  s.warnings = left.warnings;
  s.warnings.insert(s.warnings.end(), right.warnings.begin(), right.warnings.end());

  const int nc = c.frame_count(), nl = l.frame_count(), nr = r.frame_count();
  s.start_center = std::max({0, -s.offset_left, -s.offset_right});
  const int end = std::min({nc, nl - s.offset_left, nr - s.offset_right});
  s.trimmed_length = end - s.start_center;
  if (s.trimmed_length < 1) fail(ErrorCode::NoOverlap, "aligned streams share no frames");
  s.start_left = s.start_center + s.offset_left;
  s.start_right = s.start_center + s.offset_right;
  return s;
}

inline Json shift_signal_to_json(const ShiftSignal& s) {
  return Json{{"camera_id", std::string(to_string(s.camera))}, {"fps", s.fps}, {"shifts", s.shifts}};
}

inline ShiftSignal shift_signal_from_json(const Json& doc) {
  ShiftSignal s;
  s.camera = parse_camera_id(json_get<std::string>(doc, "camera_id"));
  s.fps = json_get<double>(doc, "fps");
  s.shifts = json_get<std::vector<double>>(doc, "shifts");
  require(!s.shifts.empty(), ErrorCode::ParseError, "shift signal has no entries");
  for (double v : s.shifts) require(std::isfinite(v), ErrorCode::ParseError, "non-finite shift");
  return s;
}

inline Json sync_result_to_json(const SyncResult& s) {
  return Json{{"offset_left", s.offset_left},
              {"offset_right", s.offset_right},
              {"trimmed_length", s.trimmed_length},
              {"residual_l1_left", s.residual_l1_left},
              {"residual_l1_right", s.residual_l1_right},
              {"presync_l1_left", s.presync_l1_left},
              {"presync_l1_right", s.presync_l1_right},
              {"start_left", s.start_left},
              {"start_center", s.start_center},
              {"start_right", s.start_right},
              {"loss_normalization", "actual overlap length"},
              {"search_evaluations", s.evaluations},
              {"warnings", s.warnings}};
}

/// Aligned triplet index -> frame names, given each stream's ordered names.
inline Json sync_manifest(const SyncResult& s, const std::vector<std::string>& left,
                          const std::vector<std::string>& center, const std::vector<std::string>& right) {
  Json triplets = Json::array();
  for (int k = 0; k < s.trimmed_length; ++k) {
    const auto li = static_cast<std::size_t>(s.start_left + k);
    const auto ci = static_cast<std::size_t>(s.start_center + k);
    const auto ri = static_cast<std::size_t>(s.start_right + k);
    require(li < left.size() && ci < center.size() && ri < right.size(), ErrorCode::IndexOutOfRange,
            "sync result does not fit the frame lists");
    triplets.push_back(Json{{"index", k}, {"L", left[li]}, {"C", center[ci]}, {"R", right[ri]}});
  }
  Json doc = sync_result_to_json(s);
  doc["triplets"] = std::move(triplets);
  return doc;
}

}  // namespace rigrecon::sync
