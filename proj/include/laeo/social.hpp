#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "laeo/domain.hpp"
#include "laeo/eval.hpp"
#include "laeo/rng.hpp"

namespace laeo::social {

enum class Role { Main, Secondary, Irrelevant, Wrong };

inline Role role_from_string(std::string_view s) {
  if (s == "main") return Role::Main;
  if (s == "secondary") return Role::Secondary;
  if (s == "irrelevant") return Role::Irrelevant;
  if (s == "wrong") return Role::Wrong;
  throw ValidationError("unknown character role '" + std::string(s) + "'");
}

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::Main: return "main";
    case Role::Secondary: return "secondary";
    case Role::Irrelevant: return "irrelevant";
    case Role::Wrong: return "wrong";
  }
  return "?";
}

struct Character {
  std::string video_id;
  int track_id = 0;
  std::string name;
  Role role = Role::Main;
};

// LAEO score of a track pair at one frame.
struct FrameScore {
  std::string video_id;
  int track_a = 0, track_b = 0;
  int frame = 0;
  double score = 0;
};

struct InteractionLabel {
  std::string shot_id;
  std::string char_a, char_b;
  bool interacting = false;
};

struct Episode {
  std::vector<ShotRecord> shots;
  std::vector<HeadTrack> tracks;
  std::vector<Character> characters;
  std::vector<FrameScore> scores;
  std::vector<InteractionLabel> labels;
};

// One (shot, character pair) unit with every interaction score.
struct PairRow {
  std::string shot_id;
  std::string char_a, char_b;  // char_a < char_b
  int coexisting = 0;
  int shot_frames = 0;
  double al = 0, scr = 0, ups = 0, upe = 0, rp = 0;
  std::optional<bool> label;
};

enum class Score { AL, SCR, UPS, UPE, RP };

inline constexpr Score kAllScores[] = {Score::AL, Score::SCR, Score::UPS, Score::UPE, Score::RP};

inline std::string_view to_string(Score s) {
  switch (s) {
    case Score::AL: return "AL";
    case Score::SCR: return "SCR";
    case Score::UPS: return "UPS";
    case Score::UPE: return "UPE";
    case Score::RP: return "RP";
  }
  return "?";
}

inline double value(const PairRow& r, Score s) {
  switch (s) {
    case Score::AL: return r.al;
    case Score::SCR: return r.scr;
    case Score::UPS: return r.ups;
    case Score::UPE: return r.upe;
    case Score::RP: return r.rp;
  }
  return 0;
}

// Mean of per-frame pair scores over the co-existing frames; frames where the
// pair does not co-exist are simply absent from `per_frame`.
inline double average_laeo(const std::vector<double>& per_frame) {
  require(!per_frame.empty(), "characters never co-exist in the shot; AL is undefined");
  double s = 0;
  for (double v : per_frame) s += v;
  return s / double(per_frame.size());
}

namespace detail {

using TrackKey = std::pair<std::string, int>;

inline std::pair<std::string, std::string> ordered(std::string a, std::string b) {
  if (b < a) std::swap(a, b);
  return {std::move(a), std::move(b)};
}

}  // namespace detail

// AL and the four baselines for every character pair co-existing in a shot.
// Characters with an irrelevant or wrong role are ignored. Rows come out in
// shot order, then by character names; RP draws follow that order.
inline std::vector<PairRow> pair_scores(const Episode& ep, std::uint64_t seed) {
  std::map<detail::TrackKey, std::string> owner;
  for (const auto& c : ep.characters) {
    if (c.role != Role::Main && c.role != Role::Secondary) continue;
    require(owner.emplace(detail::TrackKey{c.video_id, c.track_id}, c.name).second,
            "track " + std::to_string(c.track_id) + " of video '" + c.video_id + "' has two characters");
  }
  std::map<std::tuple<std::string, int, int, int>, double> score_at;
  for (const auto& s : ep.scores) {
    require(std::isfinite(s.score) && s.score >= 0 && s.score <= 1, "pair scores must be in [0, 1]");
    score_at[{s.video_id, std::min(s.track_a, s.track_b), std::max(s.track_a, s.track_b), s.frame}] = s.score;
  }
  std::map<std::tuple<std::string, std::string, std::string>, bool> labels;
  for (const auto& l : ep.labels) {
    auto [a, b] = detail::ordered(l.char_a, l.char_b);
    labels[{l.shot_id, a, b}] = l.interacting;
  }

  std::vector<PairRow> rows;
  std::set<std::pair<std::string, std::string>> episode_pairs;
  for (const auto& shot : ep.shots) {
    require(shot.last >= shot.first, "shot '" + shot.shot_id + "' has an empty frame range");
    // Per pair: per-frame max over the two characters' track pairs.
    std::map<std::pair<std::string, std::string>, std::vector<double>> frames;
    for (int f = shot.first; f <= shot.last; ++f) {
      std::map<std::string, std::vector<int>> present;
      for (const auto& t : ep.tracks) {
        if (t.video_id != shot.video_id || !t.alive(f)) continue;
        if (auto it = owner.find({t.video_id, t.track_id}); it != owner.end()) present[it->second].push_back(t.track_id);
      }
      for (auto i = present.begin(); i != present.end(); ++i)
        for (auto j = std::next(i); j != present.end(); ++j) {
          double best = 0;
          for (int ta : i->second)
            for (int tb : j->second)
              if (auto s = score_at.find({shot.video_id, std::min(ta, tb), std::max(ta, tb), f}); s != score_at.end())
                best = std::max(best, s->second);
          frames[{i->first, j->first}].push_back(best);
        }
    }
    const double ups = frames.empty() ? 0.0 : 1.0 / double(frames.size());
    for (const auto& [pair, per_frame] : frames) {
      PairRow r;
      r.shot_id = shot.shot_id;
      r.char_a = pair.first;
      r.char_b = pair.second;
      r.coexisting = int(per_frame.size());
      r.shot_frames = shot.num_frames();
      r.al = average_laeo(per_frame);
      r.scr = double(r.coexisting) / double(r.shot_frames);
      r.ups = ups;
      if (auto it = labels.find({shot.shot_id, pair.first, pair.second}); it != labels.end()) r.label = it->second;
      episode_pairs.insert(pair);
      rows.push_back(std::move(r));
    }
  }
  Rng rng(seed);
  for (auto& r : rows) {
    r.upe = 1.0 / double(episode_pairs.size());
    r.rp = rng.uniform();
  }
  return rows;
}

// AP of one score over labeled rows; a pair filter gives the per-pair mode,
// no filter the pair-agnostic mode.
inline double interaction_ap(const std::vector<PairRow>& rows, Score s,
                             const std::optional<std::pair<std::string, std::string>>& pair = std::nullopt) {
  std::vector<double> scores;
  std::vector<bool> labels;
  std::optional<std::pair<std::string, std::string>> want;
  if (pair) want = detail::ordered(pair->first, pair->second);
  for (const auto& r : rows) {
    if (!r.label) continue;
    if (want && (r.char_a != want->first || r.char_b != want->second)) continue;
    scores.push_back(value(r, s));
    labels.push_back(*r.label);
  }
  return eval::average_precision(scores, labels).ap;
}

struct Edge {
  std::string a, b;
  double weight = 0;
  int shots = 0;
};

struct FriendGraph {
  std::vector<std::string> nodes;
  std::vector<Edge> edges;
};

// Episode-level friend-ness: mean AL over the shots where the pair appears.
inline FriendGraph friendness_graph(const std::vector<PairRow>& rows) {
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> acc;
  for (const auto& r : rows) {
    auto& e = acc[{r.char_a, r.char_b}];
    e.first += r.al;
    e.second += 1;
  }
  FriendGraph g;
  std::set<std::string> nodes;
  for (const auto& [k, v] : acc) {
    g.edges.push_back({k.first, k.second, v.first / double(v.second), v.second});
    nodes.insert(k.first);
    nodes.insert(k.second);
  }
  g.nodes.assign(nodes.begin(), nodes.end());
  return g;
}

inline std::string to_dot(const FriendGraph& g, double max_width = 8.0) {
  std::string out = "// format=laeo-friendness,version=1\ngraph friendness {\n";
  for (const auto& n : g.nodes) out += "  \"" + n + "\";\n";
  char buf[256];
  for (const auto& e : g.edges) {
    std::snprintf(buf, sizeof buf, "  \"%s\" -- \"%s\" [weight=%.6f, penwidth=%.6f];\n", e.a.c_str(), e.b.c_str(),
                  e.weight, max_width * e.weight);
    out += buf;
  }
  out += "}\n";
  return out;
}

inline std::string rows_csv(const std::vector<PairRow>& rows) {
  std::string out = "#format=laeo-social,version=1\nshot_id,char_a,char_b,AL,SCR,UPS,UPE,RP,label\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%s\n", r.shot_id.c_str(), r.char_a.c_str(),
                  r.char_b.c_str(), r.al, r.scr, r.ups, r.upe, r.rp, !r.label ? "" : *r.label ? "1" : "0");
    out += buf;
  }
  return out;
}

}  // namespace laeo::social
