#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "laeo/domain.hpp"

namespace laeo::tracker {

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

struct LinkerConfig {
  double iou_link_threshold = 0.5;
  int max_missed_frames = 5;
  int min_track_length = 10;

  void validate() const {
    require(iou_link_threshold > 0 && iou_link_threshold < 1, "iou_link_threshold must be in (0,1)");
    require(max_missed_frames >= 0, "max_missed_frames must be >= 0");
    require(min_track_length >= 1, "min_track_length must be >= 1");
  }
};

namespace detail {

struct LiveTrack {
  int order = 0;  // creation order within the video
  std::vector<std::pair<int, BoundingBox>> obs;
  int last_frame() const { return obs.back().first; }
};

inline std::vector<HeadTrack> link_video(const std::string& video,
                                         std::map<int, std::vector<const HeadDetection*>>& by_frame,
                                         const LinkerConfig& cfg, int& next_id) {
  std::vector<LiveTrack> live, closed;
  int created = 0;
  for (auto& [frame, dets] : by_frame) {
    // Close tracks that have been missing for too long before matching.
    for (auto it = live.begin(); it != live.end();) {
      if (frame - it->last_frame() - 1 > cfg.max_missed_frames) {
        closed.push_back(std::move(*it));
        it = live.erase(it);
      } else {
        ++it;
      }
    }
    std::vector<bool> taken(dets.size(), false);
    for (auto& t : live) {
      const BoundingBox& last = t.obs.back().second;
      int best = -1;
      double best_iou = -1.0;
      for (std::size_t j = 0; j < dets.size(); ++j) {
        if (taken[j]) continue;
        const double v = iou(last, dets[j]->box);
        if (v < cfg.iou_link_threshold) continue;
        const bool better =
            best < 0 || v > best_iou ||
            (v == best_iou && dets[j]->confidence > dets[static_cast<std::size_t>(best)]->confidence);
        if (better) {
          best = static_cast<int>(j);
          best_iou = v;
        }
      }
      if (best >= 0) {
        taken[static_cast<std::size_t>(best)] = true;
        t.obs.emplace_back(frame, dets[static_cast<std::size_t>(best)]->box);
      }
    }
    for (std::size_t j = 0; j < dets.size(); ++j)
      if (!taken[j]) live.push_back(LiveTrack{created++, {{frame, dets[j]->box}}});
  }
  for (auto& t : live) closed.push_back(std::move(t));
  std::sort(closed.begin(), closed.end(),
            [](const LiveTrack& a, const LiveTrack& b) { return a.order < b.order; });

  std::vector<HeadTrack> out;
  for (auto& t : closed) {
    for (auto& track : HeadTrack::from_observations(0, video, t.obs, cfg.max_missed_frames)) {
      if (track.length() < cfg.min_track_length) continue;
      track.track_id = next_id++;
      out.push_back(std::move(track));
    }
  }
  return out;
}

}  // namespace detail

// Greedy IoU linking. Live tracks claim detections in creation order; each
// takes the unclaimed detection with the highest IoU against its last box
// (ties: higher confidence, then lower index). Tracks are numbered from 0 in
// video order, then creation order.
inline std::vector<HeadTrack> link_detections(const std::vector<HeadDetection>& dets,
                                              const LinkerConfig& cfg = {}) {
  cfg.validate();
  std::map<std::string, std::map<int, std::vector<const HeadDetection*>>> grouped;
  for (const auto& d : dets) grouped[d.video_id][d.frame].push_back(&d);
  std::vector<HeadTrack> out;
  int next_id = 0;
  for (auto& [video, by_frame] : grouped) {
    auto tracks = detail::link_video(video, by_frame, cfg, next_id);
    for (auto& t : tracks) out.push_back(std::move(t));
  }
  return out;
}

// T consecutive frames on which two tracks are both alive. The left role
// goes to the head with the smaller x-center at the central frame.
struct TrackWindow {
  std::string video_id;
  int left_track = 0, right_track = 0;
  int start = 0;
  int length = 0;
  FrameSize frame;
  std::vector<BoundingBox> left_boxes, right_boxes;

  int central_frame() const { return start + length / 2; }
  int end() const { return start + length - 1; }
  const BoundingBox& left_at(int f) const { return left_boxes.at(static_cast<std::size_t>(f - start)); }
  const BoundingBox& right_at(int f) const { return right_boxes.at(static_cast<std::size_t>(f - start)); }
};

inline TrackWindow make_window(const HeadTrack& a, const HeadTrack& b, int start, int length,
                               FrameSize frame = {}) {
  require(length >= 1, "window length must be >= 1");
  require(a.video_id == b.video_id, "window tracks must come from one video");
  for (int f = start; f < start + length; ++f)
    require(a.alive(f) && b.alive(f), "both tracks must be alive on every window frame");
  const int center = start + length / 2;
  const bool a_left = a.box_at(center).cx() <= b.box_at(center).cx();
  const HeadTrack& l = a_left ? a : b;
  const HeadTrack& r = a_left ? b : a;
  TrackWindow w{a.video_id, l.track_id, r.track_id, start, length, frame, {}, {}};
  for (int f = start; f < start + length; ++f) {
    w.left_boxes.push_back(l.box_at(f));
    w.right_boxes.push_back(r.box_at(f));
  }
  return w;
}

// Every window of length T (stride `stride`) over every co-alive track pair.
inline std::vector<TrackWindow> enumerate_pair_windows(const std::vector<HeadTrack>& tracks, int T,
                                                       FrameSize frame = {}, int stride = 1) {
  require(T >= 1, "T must be >= 1");
  require(stride >= 1, "stride must be >= 1");
  std::vector<TrackWindow> out;
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    for (std::size_t j = i + 1; j < tracks.size(); ++j) {
      const auto& a = tracks[i];
      const auto& b = tracks[j];
      if (a.video_id != b.video_id) continue;
      const int lo = std::max(a.start_frame, b.start_frame);
      const int hi = std::min(a.end_frame(), b.end_frame());
      for (int s = lo; s + T - 1 <= hi; s += stride) out.push_back(make_window(a, b, s, T, frame));
    }
  }
  return out;
}

}  // namespace laeo::tracker
