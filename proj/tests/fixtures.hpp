#pragma once

#include <string>
#include <vector>

#include "laeo/social.hpp"

namespace fixture {

using laeo::BoundingBox;
using laeo::HeadTrack;
using laeo::social::Character;
using laeo::social::Episode;
using laeo::social::FrameScore;
using laeo::social::Role;

inline HeadTrack track(int id, int first, int last, double x) {
  return HeadTrack{id, "ep1", first, std::vector<BoundingBox>(std::size_t(last - first + 1), BoundingBox{x, 50, x + 40, 90})};
}

inline void constant_scores(Episode& ep, int a, int b, int first, int last, double s) {
  for (int f = first; f <= last; ++f) ep.scores.push_back({"ep1", a, b, f, s});
}

// Four 20-frame shots, six named characters plus one mislabeled track.
//   s1 (0-19):  ana+ben the whole shot, 0.875 then 0.5 -> AL 0.6875 (interacting)
//   s2 (20-39): cal+dee whole shot at 0.125, but cal's second track scores
//               0.5 with dee on 25-29 -> AL (15*0.125 + 5*0.5)/20 = 0.21875;
//               eve joins on 30-39: cal+eve 0.75 (interacting), dee+eve unscored -> 0
//   s3 (40-59): ana all shot, fay 40-49 (0.625, interacting), ben 50-59 (0.25);
//               ben and fay never co-exist
//   s4 (60-79): dee+fay 0.375; a "wrong" track is present but ignored
inline Episode mini_episode() {
  Episode ep;
  for (int k = 0; k < 4; ++k) {
    laeo::ShotRecord s;
    s.shot_id = "s" + std::to_string(k + 1);
    s.video_id = "ep1";
    s.first = 20 * k;
    s.last = 20 * k + 19;
    ep.shots.push_back(s);
  }
  ep.tracks = {track(0, 0, 19, 10),   track(1, 0, 19, 100),  track(2, 20, 39, 10),  track(3, 20, 39, 100),
               track(4, 30, 39, 200), track(5, 40, 59, 10),  track(6, 40, 49, 100), track(7, 50, 59, 200),
               track(8, 60, 79, 10),  track(9, 60, 79, 100), track(10, 60, 79, 200), track(11, 25, 29, 300)};
  ep.characters = {{"ep1", 0, "ana", Role::Main},       {"ep1", 1, "ben", Role::Main},
                   {"ep1", 2, "cal", Role::Secondary},  {"ep1", 3, "dee", Role::Main},
                   {"ep1", 4, "eve", Role::Secondary},  {"ep1", 5, "ana", Role::Main},
                   {"ep1", 6, "fay", Role::Main},       {"ep1", 7, "ben", Role::Main},
                   {"ep1", 8, "dee", Role::Main},       {"ep1", 9, "fay", Role::Main},
                   {"ep1", 10, "zed", Role::Wrong},     {"ep1", 11, "cal", Role::Secondary}};
  constant_scores(ep, 0, 1, 0, 9, 0.875);
  constant_scores(ep, 0, 1, 10, 19, 0.5);
  constant_scores(ep, 2, 3, 20, 39, 0.125);
  constant_scores(ep, 11, 3, 25, 29, 0.5);
  constant_scores(ep, 2, 4, 30, 39, 0.75);
  constant_scores(ep, 5, 6, 40, 49, 0.625);
  constant_scores(ep, 5, 7, 50, 59, 0.25);
  constant_scores(ep, 8, 9, 60, 79, 0.375);
  constant_scores(ep, 8, 10, 60, 79, 1.0);  // involves the ignored track
  ep.labels = {{"s1", "ben", "ana", true},  {"s2", "cal", "dee", false}, {"s2", "cal", "eve", true},
               {"s2", "dee", "eve", false}, {"s3", "ana", "ben", false}, {"s3", "ana", "fay", true},
               {"s4", "dee", "fay", false}};
  return ep;
}

}  // namespace fixture
