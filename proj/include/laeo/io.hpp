#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "laeo/domain.hpp"
#include "laeo/eval.hpp"
#include "laeo/nn/checkpoint.hpp"
#include "laeo/social.hpp"
#include "laeo/synth.hpp"

namespace laeo::io {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

// Text formats carry six decimals.
inline double round6(double v) { return std::round(v * 1e6) / 1e6; }

inline Json box_json(const BoundingBox& b) { return Json::array({round6(b.x1), round6(b.y1), round6(b.x2), round6(b.y2)}); }

inline BoundingBox box_from(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw ValidationError("box must be [x1, y1, x2, y2]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

using FrameSizes = std::map<std::string, FrameSize>;

inline FrameSize frame_of(const FrameSizes& m, const std::string& video) {
  auto it = m.find(video);
  return it == m.end() ? FrameSize{} : it->second;
}

// ---- JSONL plumbing ---------------------------------------------------------

inline Json header(std::string_view format, const FrameSizes& videos = {}) {
  Json h;
  h["format"] = std::string(format);
  h["version"] = kFormatVersion;
  if (!videos.empty()) {
    Json v = Json::object();
    for (const auto& [id, f] : videos) v[id] = Json::array({f.width, f.height});
    h["videos"] = v;
  }
  return h;
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const Json& head) { add(head); }
  void add(const Json& j) {
    text_ += j.dump();
    text_ += '\n';
  }
  const std::string& text() const { return text_; }
  void save(const std::string& path) const { nn::write_file(path, text_); }

 private:
  std::string text_;
};

struct JsonlFile {
  std::string path;
  Json head;
  std::vector<std::pair<std::size_t, Json>> records;  // (line number, record)
  FrameSizes videos;
};

// Parses a JSONL file and checks the header's format name and version.
inline JsonlFile read_jsonl(const std::string& path, std::string_view format) {
  std::istringstream in(nn::read_file(path));
  JsonlFile f;
  f.path = path;
  std::string line;
  std::size_t n = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const std::exception& e) {
      throw ParseError(path, n, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(path, n, "expected a JSON object");
    if (!have_header) {
      if (j.value("format", std::string()) != format)
        throw ParseError(path, n, "expected header with format \"" + std::string(format) + "\"");
      if (!j.contains("version") || !j["version"].is_number_integer() || j["version"].get<int>() != kFormatVersion)
        throw ParseError(path, n, "unsupported " + std::string(format) + " version (expected 1)");
      if (j.contains("videos"))
        for (const auto& [id, wh] : j["videos"].items()) {
          if (!wh.is_array() || wh.size() != 2) throw ParseError(path, n, "videos entries must be [width, height]");
          f.videos[id] = {wh[0].get<int>(), wh[1].get<int>()};
        }
      f.head = std::move(j);
      have_header = true;
      continue;
    }
    f.records.emplace_back(n, std::move(j));
  }
  if (!have_header) throw ParseError(path, n == 0 ? 1 : n, "missing header line");
  return f;
}

// Runs `fn` on each record, turning field errors into line-numbered errors.
template <class Fn>
void each_record(const JsonlFile& f, Fn&& fn) {
  for (const auto& [line, j] : f.records) {
    try {
      fn(j);
    } catch (const ParseError&) {
      throw;
    } catch (const ValidationError& e) {
      throw ValidationError(f.path + ":" + std::to_string(line) + ": " + e.what());
    } catch (const std::exception& e) {
      throw ParseError(f.path, line, e.what());
    }
  }
}

// ---- detections and tracks -------------------------------------------------

inline std::string detections_jsonl(const std::vector<HeadDetection>& dets, const FrameSizes& videos = {}) {
  JsonlWriter w(header("laeo-detections", videos));
  for (const auto& d : dets) {
    Json j;
    j["video_id"] = d.video_id;
    j["frame"] = d.frame;
    j["x1"] = round6(d.box.x1);
    j["y1"] = round6(d.box.y1);
    j["x2"] = round6(d.box.x2);
    j["y2"] = round6(d.box.y2);
    j["conf"] = round6(d.confidence);
    w.add(j);
  }
  return w.text();
}

inline std::vector<HeadDetection> read_detections(const std::string& path, FrameSizes* videos = nullptr) {
  auto f = read_jsonl(path, "laeo-detections");
  std::vector<HeadDetection> out;
  each_record(f, [&](const Json& j) {
    out.push_back({j.at("video_id").get<std::string>(), j.at("frame").get<int>(),
                   {j.at("x1").get<double>(), j.at("y1").get<double>(), j.at("x2").get<double>(), j.at("y2").get<double>()},
                   j.at("conf").get<double>()});
  });
  if (videos) *videos = f.videos;
  return out;
}

inline Json track_json(const HeadTrack& t, bool with_video = true) {
  Json j;
  j["track_id"] = t.track_id;
  if (with_video) j["video_id"] = t.video_id;
  j["start_frame"] = t.start_frame;
  Json boxes = Json::array();
  for (const auto& b : t.boxes) boxes.push_back(box_json(b));
  j["boxes"] = boxes;
  return j;
}

inline HeadTrack track_from(const Json& j, const std::string& video) {
  HeadTrack t{j.at("track_id").get<int>(), j.contains("video_id") ? j["video_id"].get<std::string>() : video,
              j.at("start_frame").get<int>(), {}};
  for (const auto& b : j.at("boxes")) t.boxes.push_back(box_from(b));
  return t;
}

inline std::string tracks_jsonl(const std::vector<HeadTrack>& tracks, const FrameSizes& videos = {}) {
  JsonlWriter w(header("laeo-tracks", videos));
  for (const auto& t : tracks) w.add(track_json(t));
  return w.text();
}

inline std::vector<HeadTrack> read_tracks(const std::string& path, FrameSizes* videos = nullptr) {
  auto f = read_jsonl(path, "laeo-tracks");
  std::vector<HeadTrack> out;
  each_record(f, [&](const Json& j) { out.push_back(track_from(j, "")); });
  if (videos) *videos = f.videos;
  return out;
}

// ---- annotations ------------------------------------------------------------

struct Annotations {
  std::vector<PairAnnotation> pairs;
  std::vector<ShotRecord> shots;
  std::vector<social::Character> characters;
  std::vector<social::InteractionLabel> interactions;
};

inline std::string annotations_jsonl(const Annotations& a) {
  JsonlWriter w(header("laeo-annotations"));
  for (const auto& s : a.shots) {
    Json j;
    j["kind"] = "shot";
    j["shot_id"] = s.shot_id;
    j["video_id"] = s.video_id;
    j["first"] = s.first;
    j["last"] = s.last;
    if (s.label) j["label"] = std::string(to_string(*s.label));
    w.add(j);
  }
  for (const auto& p : a.pairs) {
    Json j;
    j["kind"] = "pair";
    j["video_id"] = p.video_id;
    j["frame"] = p.frame;
    if (p.shot_id) j["shot_id"] = *p.shot_id;
    j["box_a"] = box_json(p.box_a);
    j["box_b"] = box_json(p.box_b);
    j["label"] = std::string(to_string(p.label));
    w.add(j);
  }
  for (const auto& c : a.characters) {
    Json j;
    j["kind"] = "character";
    j["video_id"] = c.video_id;
    j["track_id"] = c.track_id;
    j["name"] = c.name;
    j["role"] = std::string(social::to_string(c.role));
    w.add(j);
  }
  for (const auto& l : a.interactions) {
    Json j;
    j["kind"] = "interaction";
    j["shot_id"] = l.shot_id;
    j["chars"] = Json::array({l.char_a, l.char_b});
    j["label"] = l.interacting ? "INTERACTING" : "NOT_INTERACTING";
    w.add(j);
  }
  return w.text();
}

inline Annotations read_annotations(const std::string& path) {
  auto f = read_jsonl(path, "laeo-annotations");
  Annotations a;
  each_record(f, [&](const Json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "pair") {
      PairAnnotation p{j.at("video_id").get<std::string>(), j.at("frame").get<int>(), box_from(j.at("box_a")),
                       box_from(j.at("box_b")), label_from_string(j.at("label").get<std::string>()), std::nullopt};
      if (j.contains("shot_id")) p.shot_id = j["shot_id"].get<std::string>();
      a.pairs.push_back(std::move(p));
    } else if (kind == "shot") {
      ShotRecord s;
      s.shot_id = j.at("shot_id").get<std::string>();
      s.video_id = j.at("video_id").get<std::string>();
      s.first = j.at("first").get<int>();
      s.last = j.at("last").get<int>();
      if (j.contains("label")) s.label = label_from_string(j["label"].get<std::string>());
      a.shots.push_back(std::move(s));
    } else if (kind == "character") {
      a.characters.push_back({j.at("video_id").get<std::string>(), j.at("track_id").get<int>(),
                              j.at("name").get<std::string>(), social::role_from_string(j.at("role").get<std::string>())});
    } else if (kind == "interaction") {
      const auto& c = j.at("chars");
      if (!c.is_array() || c.size() != 2) throw ValidationError("chars must name two characters");
      const auto lab = j.at("label").get<std::string>();
      if (lab != "INTERACTING" && lab != "NOT_INTERACTING")
        throw ValidationError("interaction label must be INTERACTING or NOT_INTERACTING");
      a.interactions.push_back({j.at("shot_id").get<std::string>(), c[0].get<std::string>(), c[1].get<std::string>(),
                                lab == "INTERACTING"});
    } else {
      throw ValidationError("unknown annotation kind '" + kind + "'");
    }
  });
  return a;
}

// ---- scores -----------------------------------------------------------------

// A scored pair at one frame, with the track ids when known.
struct ScoreRecord {
  eval::ScoredPair pair;
  std::optional<int> track_a, track_b;
};

inline std::string scores_jsonl(const std::vector<ScoreRecord>& scores) {
  JsonlWriter w(header("laeo-scores"));
  for (const auto& s : scores) {
    Json j;
    j["video_id"] = s.pair.video_id;
    j["frame"] = s.pair.frame;
    j["box_a"] = box_json(s.pair.box_a);
    j["box_b"] = box_json(s.pair.box_b);
    j["score"] = round6(s.pair.score);
    if (s.track_a) j["track_a"] = *s.track_a;
    if (s.track_b) j["track_b"] = *s.track_b;
    w.add(j);
  }
  return w.text();
}

inline std::vector<ScoreRecord> read_scores(const std::string& path) {
  auto f = read_jsonl(path, "laeo-scores");
  std::vector<ScoreRecord> out;
  each_record(f, [&](const Json& j) {
    ScoreRecord r;
    r.pair = {j.at("video_id").get<std::string>(), j.at("frame").get<int>(), box_from(j.at("box_a")),
              box_from(j.at("box_b")), j.at("score").get<double>()};
    if (!std::isfinite(r.pair.score) || r.pair.score < 0 || r.pair.score > 1)
      throw ValidationError("score must be in [0, 1]");
    if (j.contains("track_a")) r.track_a = j["track_a"].get<int>();
    if (j.contains("track_b")) r.track_b = j["track_b"].get<int>();
    out.push_back(std::move(r));
  });
  return out;
}

// ---- tensor blobs -----------------------------------------------------------

inline constexpr std::string_view kBlobMagic = "LTB1";

// magic, u32 rank, u32 dims, then little-endian float32 values.
inline std::string encode_blob(const nn::Tensor<float>& t) {
  std::string out(kBlobMagic);
  nn::bin::put_u32(out, std::uint32_t(t.rank()));
  for (std::size_t d : t.shape()) nn::bin::put_u32(out, std::uint32_t(d));
  for (float v : t.values()) nn::bin::put_f32(out, v);
  return out;
}

inline nn::Tensor<float> decode_blob(std::string_view data, const std::string& source) {
  nn::bin::Reader r(data, source);
  if (r.bytes(kBlobMagic.size()) != kBlobMagic) r.fail("bad magic (expected LTB1)");
  const std::uint32_t rank = r.u32();
  if (rank == 0 || rank > 8) r.fail("implausible tensor rank");
  nn::Shape shape;
  for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u32());
  const std::size_t n = nn::shape_size(shape);
  if (data.size() - r.pos() != n * 4) r.fail("payload size does not match shape " + nn::shape_str(shape));
  std::vector<float> v(n);
  for (auto& x : v) x = r.f32();
  return nn::Tensor<float>(std::move(shape), std::move(v));
}

// ---- dataset container -------------------------------------------------------

inline Json pose_json(const HeadPose& p) { return Json::array({round6(p.yaw), round6(p.pitch), round6(p.roll)}); }

// index.jsonl plus blobs/<id>.ltb holding each pair's [2, S, 64, 64, 3] crops.
inline void write_dataset(const std::string& dir, const synth::Dataset& ds, const synth::SynthConfig& cfg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "blobs", ec);
  if (ec) throw IoError("cannot create '" + dir + "/blobs': " + ec.message());
  Json head = header("laeo-dataset");
  head["frame"] = Json::array({cfg.camera.frame.width, cfg.camera.frame.height});
  head["count"] = ds.records.size();
  JsonlWriter w(head);
  for (const auto& r : ds.records) {
    Json j;
    j["id"] = r.id;
    j["label"] = r.label;
    j["strategy"] = r.strategy;
    j["split"] = r.split;
    j["seed"] = std::to_string(r.seed);
    const std::string blob = "blobs/" + r.id + ".ltb";
    j["blob"] = blob;
    if (r.left_head && r.right_head) j["poses"] = Json::array({pose_json(r.left_head->pose), pose_json(r.right_head->pose)});
    Json tracks = Json::array();
    for (const auto& t : r.tracks) tracks.push_back(track_json(t, false));
    j["tracks"] = tracks;
    w.add(j);

    nn::Tensor<float> crops;
    if (!r.stored_crops.empty()) {
      crops = r.stored_crops;
    } else {
      const auto a = synth::source_frames(r, 0, cfg), b = synth::source_frames(r, 1, cfg);
      std::vector<float> v(a.values().begin(), a.values().end());
      v.insert(v.end(), b.values().begin(), b.values().end());
      crops = nn::Tensor<float>({2, a.dim(0), a.dim(1), a.dim(2), a.dim(3)}, std::move(v));
    }
    nn::write_file((fs::path(dir) / blob).string(), encode_blob(crops));
  }
  w.save((fs::path(dir) / "index.jsonl").string());
}

struct LoadedDataset {
  synth::Dataset data;
  FrameSize frame;
  // Per-record head poses, when the writer knew them.
  std::vector<std::optional<std::pair<HeadPose, HeadPose>>> poses;
};

inline LoadedDataset read_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  const std::string index = (fs::path(dir) / "index.jsonl").string();
  auto f = read_jsonl(index, "laeo-dataset");
  LoadedDataset out;
  if (f.head.contains("frame")) out.frame = {f.head["frame"][0].get<int>(), f.head["frame"][1].get<int>()};
  each_record(f, [&](const Json& j) {
    synth::PairRecord r;
    r.id = j.at("id").get<std::string>();
    r.label = j.at("label").get<int>();
    if (r.label != 0 && r.label != 1) throw ValidationError("label must be 0 or 1");
    r.strategy = j.value("strategy", std::string());
    r.split = j.at("split").get<std::string>();
    r.seed = std::stoull(j.at("seed").get<std::string>());
    r.frame = out.frame;
    for (const auto& t : j.at("tracks")) r.tracks.push_back(track_from(t, r.id));
    if (r.tracks.size() < 2) throw ValidationError("a pair record needs at least two tracks");
    const std::string blob = (fs::path(dir) / j.at("blob").get<std::string>()).string();
    r.stored_crops = decode_blob(nn::read_file(blob), blob);
    if (r.stored_crops.rank() != 5 || r.stored_crops.dim(0) != 2 || r.stored_crops.dim(2) != 64 ||
        r.stored_crops.dim(3) != 64 || r.stored_crops.dim(4) != 3)
      throw ValidationError("blob '" + blob + "' must be [2, S, 64, 64, 3]");
    std::optional<std::pair<HeadPose, HeadPose>> pose;
    if (j.contains("poses")) {
      const auto& p = j["poses"];
      pose = std::pair<HeadPose, HeadPose>{{p[0][0].get<double>(), p[0][1].get<double>(), p[0][2].get<double>()},
                                           {p[1][0].get<double>(), p[1][1].get<double>(), p[1][2].get<double>()}};
    }
    out.poses.push_back(pose);
    out.data.records.push_back(std::move(r));
  });
  return out;
}

}  // namespace laeo::io
