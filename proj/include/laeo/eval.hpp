#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "laeo/domain.hpp"
#include "laeo/tracker.hpp"

namespace laeo::eval {

enum class Protocol { FrameIou, HeadInHuman, Shot };

inline std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::FrameIou: return "frame_iou";
    case Protocol::HeadInHuman: return "ava";
    case Protocol::Shot: return "shot";
  }
  return "?";
}

inline Protocol protocol_from_string(std::string_view s) {
  if (s == "frame_iou") return Protocol::FrameIou;
  if (s == "ava") return Protocol::HeadInHuman;
  if (s == "shot") return Protocol::Shot;
  throw ValidationError("unknown protocol '" + std::string(s) + "' (expected frame_iou, ava or shot)");
}

// A predicted head pair at one frame.
struct ScoredPair {
  std::string video_id;
  int frame = 0;
  BoundingBox box_a, box_b;
  double score = 0;
};

// Fraction of the head box covered by the (human) box.
inline double head_coverage(const BoundingBox& head, const BoundingBox& human) {
  const double w = std::min(head.x2, human.x2) - std::max(head.x1, human.x1);
  const double h = std::min(head.y2, human.y2) - std::max(head.y1, human.y1);
  if (w <= 0 || h <= 0) return 0.0;
  return w * h / head.area();
}

inline constexpr double kMatchThreshold = 0.5;

// Both heads localized under the better of the two head assignments.
inline bool match_pair(const ScoredPair& p, const PairAnnotation& gt, Protocol proto) {
  require(proto != Protocol::Shot, "shot protocol evaluates shot scores, not pair matches");
  if (p.video_id != gt.video_id || p.frame != gt.frame) return false;
  auto ok = [&](const BoundingBox& pred, const BoundingBox& truth) {
    return proto == Protocol::FrameIou ? tracker::iou(pred, truth) > kMatchThreshold
                                       : head_coverage(pred, truth) > kMatchThreshold;
  };
  return (ok(p.box_a, gt.box_a) && ok(p.box_b, gt.box_b)) || (ok(p.box_a, gt.box_b) && ok(p.box_b, gt.box_a));
}

struct PrPoint {
  double score, precision, recall;
};

struct ApResult {
  double ap = 0;
  std::size_t positives = 0;
  std::size_t true_positives = 0;
  std::size_t ignored = 0;  // predictions matching only AMBIGUOUS annotations
  std::vector<PrPoint> curve;
};

// Indices sorted by descending score; ties keep input order.
inline std::vector<std::size_t> rank_order(const std::vector<double>& scores) {
  for (double s : scores) require(std::isfinite(s), "scores must be finite");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return idx;
}

// Non-interpolated AP over a ranked hit list: the mean, over positives, of
// precision at the rank where each positive is retrieved.
inline ApResult ap_from_hits(const std::vector<double>& ranked_scores, const std::vector<bool>& hits,
                             std::size_t positives) {
  require(positives > 0, "average precision is undefined without positives");
  ApResult r;
  r.positives = positives;
  double sum = 0;
  for (std::size_t k = 0; k < hits.size(); ++k) {
    if (hits[k]) {
      ++r.true_positives;
      sum += double(r.true_positives) / double(k + 1);
    }
    r.curve.push_back({ranked_scores[k], double(r.true_positives) / double(k + 1),
                       double(r.true_positives) / double(positives)});
  }
  r.ap = sum / double(positives);
  return r;
}

// AP for scored units with binary ground truth (shots, track pairs).
inline ApResult average_precision(const std::vector<double>& scores, const std::vector<bool>& labels) {
  require(scores.size() == labels.size(), "scores and labels differ in length");
  const auto order = rank_order(scores);
  std::vector<double> s;
  std::vector<bool> h;
  std::size_t pos = 0;
  for (std::size_t i : order) {
    s.push_back(scores[i]);
    h.push_back(labels[i]);
    pos += labels[i];
  }
  return ap_from_hits(s, h, pos);
}

// Frame-level AP: predictions are matched greedily, in rank order, to unused
// LAEO annotations; duplicates and unmatched predictions are false positives,
// predictions that only hit AMBIGUOUS annotations are dropped.
inline ApResult average_precision(const std::vector<ScoredPair>& preds, const std::vector<PairAnnotation>& gt,
                                  Protocol proto) {
  require(proto != Protocol::Shot, "use shot scores with the shot protocol");
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> by_frame;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    by_frame[{gt[i].video_id, gt[i].frame}].push_back(i);
    positives += gt[i].label == LAEOLabel::LAEO;
  }
  std::vector<double> scores;
  scores.reserve(preds.size());
  for (const auto& p : preds) scores.push_back(p.score);
  const auto order = rank_order(scores);

  std::vector<bool> used(gt.size(), false), hits;
  std::vector<double> ranked;
  std::size_t ignored = 0;
  for (std::size_t i : order) {
    const auto& p = preds[i];
    bool hit = false, ambiguous = false;
    if (auto it = by_frame.find({p.video_id, p.frame}); it != by_frame.end()) {
      for (std::size_t g : it->second) {
        if (gt[g].label != LAEOLabel::LAEO || used[g] || !match_pair(p, gt[g], proto)) continue;
        used[g] = hit = true;
        break;
      }
      if (!hit)
        for (std::size_t g : it->second)
          if (gt[g].label == LAEOLabel::Ambiguous && match_pair(p, gt[g], proto)) ambiguous = true;
    }
    if (ambiguous) {
      ++ignored;
      continue;
    }
    ranked.push_back(p.score);
    hits.push_back(hit);
  }
  auto r = ap_from_hits(ranked, hits, positives);
  r.ignored = ignored;
  return r;
}

// Per-frame scores of one track pair.
struct FrameSeries {
  int first = 0;
  std::vector<double> values;
  int last() const { return first + int(values.size()) - 1; }
};

struct WindowScore {
  int start = 0;
  int length = 1;
  double score = 0;
  int central_frame() const { return start + length / 2; }
};

// Each window's score sits at its central frame; every other frame covered by
// a window takes the score of the nearest central frame (earlier on ties).
inline FrameSeries score_track_pair_series(std::vector<WindowScore> windows) {
  require(!windows.empty(), "no window scores");
  std::stable_sort(windows.begin(), windows.end(),
                   [](const WindowScore& a, const WindowScore& b) { return a.central_frame() < b.central_frame(); });
  int lo = windows.front().start, hi = windows.front().start + windows.front().length - 1;
  for (const auto& w : windows) {
    require(w.length >= 1 && std::isfinite(w.score), "invalid window score");
    lo = std::min(lo, w.start);
    hi = std::max(hi, w.start + w.length - 1);
  }
  FrameSeries s{lo, std::vector<double>(std::size_t(hi - lo + 1))};
  std::size_t k = 0;
  for (int f = lo; f <= hi; ++f) {
    while (k + 1 < windows.size() &&
           std::abs(windows[k + 1].central_frame() - f) < std::abs(windows[k].central_frame() - f))
      ++k;
    s.values[std::size_t(f - lo)] = windows[k].score;
  }
  return s;
}

// Centered moving average; the window shrinks at the series ends.
inline std::vector<double> moving_average(const std::vector<double>& v, int width) {
  require(width >= 1 && width % 2 == 1, "smoothing width must be odd and positive");
  const int half = width / 2, n = int(v.size());
  std::vector<double> out(v.size());
  for (int i = 0; i < n; ++i) {
    double s = 0;
    int c = 0;
    for (int j = std::max(0, i - half); j <= std::min(n - 1, i + half); ++j, ++c) s += v[std::size_t(j)];
    out[std::size_t(i)] = s / c;
  }
  return out;
}

inline constexpr int kShotSmoothing = 5;

// Shot score: max over pairs of the max over frames of the smoothed series.
inline double score_shot(const std::vector<FrameSeries>& pairs, int width = kShotSmoothing) {
  double best = -1;
  for (const auto& p : pairs) {
    if (p.values.empty()) continue;
    const auto sm = moving_average(p.values, width);
    best = std::max(best, *std::max_element(sm.begin(), sm.end()));
  }
  require(best >= 0, "shot has no scored frames");
  return best;
}

inline std::string pr_csv(const ApResult& r) {
  std::string out = "#format=laeo-pr,version=1\nscore_threshold,precision,recall\n";
  char buf[128];
  for (const auto& p : r.curve) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f\n", p.score, p.precision, p.recall);
    out += buf;
  }
  return out;
}

}  // namespace laeo::eval
