#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "laeo/error.hpp"

namespace laeo {

// Axis-aligned box in frame pixels, origin top-left, y pointing down.
struct BoundingBox {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  double area() const { return width() * height(); }

  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
           x1 < x2 && y1 < y2;
  }

  static BoundingBox from_center(double cx, double cy, double w, double h) {
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }

  BoundingBox translated(double dx, double dy) const { return {x1 + dx, y1 + dy, x2 + dx, y2 + dy}; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline BoundingBox lerp(const BoundingBox& a, const BoundingBox& b, double t) {
  return {a.x1 + t * (b.x1 - a.x1), a.y1 + t * (b.y1 - a.y1), a.x2 + t * (b.x2 - a.x2),
          a.y2 + t * (b.y2 - a.y2)};
}

struct FrameSize {
  int width = 640;
  int height = 360;
  friend bool operator==(const FrameSize&, const FrameSize&) = default;
};

struct HeadDetection {
  std::string video_id;
  int frame = 0;
  BoundingBox box;
  double confidence = 1.0;
};

// Maximum gap (in frames) that track construction bridges by interpolation.
inline constexpr int kMaxInterpolatedGap = 5;

// Head boxes of one person over consecutive frames [start_frame, end_frame()].
struct HeadTrack {
  int track_id = 0;
  std::string video_id;
  int start_frame = 0;
  std::vector<BoundingBox> boxes;

  int length() const { return static_cast<int>(boxes.size()); }
  int end_frame() const { return start_frame + length() - 1; }
  bool alive(int frame) const { return frame >= start_frame && frame <= end_frame(); }
  const BoundingBox& box_at(int frame) const {
    require(alive(frame), "track " + std::to_string(track_id) + " has no box at frame " +
                              std::to_string(frame));
    return boxes[static_cast<std::size_t>(frame - start_frame)];
  }

  friend bool operator==(const HeadTrack&, const HeadTrack&) = default;

  // Builds tracks from sparse (frame, box) observations. Gaps of up to
  // `max_gap` missing frames are filled by linear interpolation; longer gaps
  // split the sequence into separate tracks (ids first_id, first_id+1, ...).
  static std::vector<HeadTrack> from_observations(int first_id, const std::string& video_id,
                                                  std::vector<std::pair<int, BoundingBox>> obs,
                                                  int max_gap = kMaxInterpolatedGap) {
    std::vector<HeadTrack> out;
    if (obs.empty()) return out;
    std::stable_sort(obs.begin(), obs.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    HeadTrack cur{first_id, video_id, obs.front().first, {obs.front().second}};
    for (std::size_t i = 1; i < obs.size(); ++i) {
      const auto& [frame, box] = obs[i];
      const int last = cur.end_frame();
      require(frame != last, "duplicate observation at frame " + std::to_string(frame));
      const int gap = frame - last - 1;
      if (gap > max_gap) {
        out.push_back(std::move(cur));
        cur = HeadTrack{first_id + static_cast<int>(out.size()), video_id, frame, {box}};
        continue;
      }
      const BoundingBox prev = cur.boxes.back();
      for (int g = 1; g <= gap; ++g) cur.boxes.push_back(lerp(prev, box, double(g) / (gap + 1)));
      cur.boxes.push_back(box);
    }
    out.push_back(std::move(cur));
    return out;
  }
};

// Head orientation in degrees. Positive yaw turns the face toward image
// right, positive pitch tilts it up.
struct HeadPose {
  double yaw = 0, pitch = 0, roll = 0;

  bool valid() const {
    return std::isfinite(yaw) && std::isfinite(pitch) && std::isfinite(roll) && yaw >= -180 &&
           yaw <= 180 && pitch >= -90 && pitch <= 90 && roll >= -180 && roll <= 180;
  }
  friend bool operator==(const HeadPose&, const HeadPose&) = default;
};

enum class LAEOLabel { LAEO, NotLAEO, Ambiguous };

inline std::string_view to_string(LAEOLabel l) {
  switch (l) {
    case LAEOLabel::LAEO: return "LAEO";
    case LAEOLabel::NotLAEO: return "NOT_LAEO";
    case LAEOLabel::Ambiguous: return "AMBIGUOUS";
  }
  return "?";
}

inline LAEOLabel label_from_string(std::string_view s) {
  if (s == "LAEO") return LAEOLabel::LAEO;
  if (s == "NOT_LAEO") return LAEOLabel::NotLAEO;
  if (s == "AMBIGUOUS") return LAEOLabel::Ambiguous;
  throw ValidationError("unknown LAEO label '" + std::string(s) + "'");
}

// Ground truth for one head pair at one frame.
struct PairAnnotation {
  std::string video_id;
  int frame = 0;
  BoundingBox box_a, box_b;
  LAEOLabel label = LAEOLabel::NotLAEO;
  std::optional<std::string> shot_id;
};

struct ShotRecord {
  std::string shot_id;
  std::string video_id;
  int first = 0, last = 0;
  std::vector<int> track_ids;
  std::vector<PairAnnotation> annotations;
  std::optional<LAEOLabel> label;  // shot-level ground truth, when annotated that way

  int num_frames() const { return last - first + 1; }
  bool contains(int frame) const { return frame >= first && frame <= last; }
};

struct Violation {
  std::string record;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  void add(std::string record, std::string message) {
    violations.push_back({std::move(record), std::move(message)});
  }
};

namespace detail {
inline std::string rec(std::string_view kind, std::size_t i) {
  return std::string(kind) + "[" + std::to_string(i) + "]";
}
inline void check_box(ValidationReport& r, const std::string& name, const BoundingBox& b,
                      std::string_view field = "box") {
  if (!b.valid())
    r.add(name, std::string(field) + " must have x1<x2, y1<y2 and finite coordinates");
}
}  // namespace detail

// Checks every record invariant and the cross references between files.
// Video ids are only cross-checked when detections or tracks are supplied.
inline ValidationReport validate_dataset(const std::vector<HeadDetection>& detections,
                                         const std::vector<HeadTrack>& tracks,
                                         const std::vector<PairAnnotation>& annotations,
                                         const std::vector<ShotRecord>& shots = {}) {
  using detail::rec;
  ValidationReport r;
  std::set<std::string> videos;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto& d = detections[i];
    const auto name = rec("detections", i);
    videos.insert(d.video_id);
    detail::check_box(r, name, d.box);
    if (d.frame < 0) r.add(name, "frame must be >= 0");
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) r.add(name, "confidence must be in [0,1]");
  }
  std::set<std::pair<std::string, int>> track_keys;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    const auto& t = tracks[i];
    const auto name = rec("tracks", i);
    videos.insert(t.video_id);
    if (t.boxes.empty()) r.add(name, "track must be non-empty");
    if (t.start_frame < 0) r.add(name, "start_frame must be >= 0");
    for (std::size_t k = 0; k < t.boxes.size(); ++k)
      detail::check_box(r, name, t.boxes[k], "boxes[" + std::to_string(k) + "]");
    if (!track_keys.insert({t.video_id, t.track_id}).second)
      r.add(name, "duplicate track_id " + std::to_string(t.track_id));
  }
  const bool check_videos = !detections.empty() || !tracks.empty();

  std::map<std::pair<std::string, std::string>, const ShotRecord*> shot_index;
  for (std::size_t i = 0; i < shots.size(); ++i) {
    const auto& s = shots[i];
    const auto name = rec("shots", i);
    if (s.first > s.last) r.add(name, "shot range requires first <= last");
    if (!shot_index.emplace(std::pair{s.video_id, s.shot_id}, &s).second)
      r.add(name, "duplicate shot_id " + s.shot_id);
    if (check_videos && !videos.count(s.video_id))
      r.add(name, "unknown video_id '" + s.video_id + "'");
    for (int id : s.track_ids)
      if (!tracks.empty() && !track_keys.count({s.video_id, id}))
        r.add(name, "references missing track " + std::to_string(id));
    for (std::size_t k = 0; k < s.annotations.size(); ++k)
      if (!s.contains(s.annotations[k].frame))
        r.add(name, "annotation " + std::to_string(k) + " frame outside shot range");
  }

  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& a = annotations[i];
    const auto name = rec("annotations", i);
    detail::check_box(r, name, a.box_a, "box_a");
    detail::check_box(r, name, a.box_b, "box_b");
    if (a.box_a == a.box_b) r.add(name, "box_a and box_b must differ");
    if (a.frame < 0) r.add(name, "frame must be >= 0");
    if (check_videos && !videos.count(a.video_id))
      r.add(name, "unknown video_id '" + a.video_id + "'");
    if (a.shot_id) {
      auto it = shot_index.find({a.video_id, *a.shot_id});
      if (it == shot_index.end())
        r.add(name, "unknown shot_id '" + *a.shot_id + "'");
      else if (!it->second->contains(a.frame))
        r.add(name, "frame " + std::to_string(a.frame) + " outside shot '" + *a.shot_id +
                        "' range [" + std::to_string(it->second->first) + "," +
                        std::to_string(it->second->last) + "]");
    }
  }
  return r;
}

// Annotations that take part in metric counts.
inline std::vector<PairAnnotation> without_ambiguous(const std::vector<PairAnnotation>& in) {
  std::vector<PairAnnotation> out;
  std::copy_if(in.begin(), in.end(), std::back_inserter(out),
               [](const PairAnnotation& a) { return a.label != LAEOLabel::Ambiguous; });
  return out;
}

}  // namespace laeo
