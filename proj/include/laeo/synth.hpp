#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "laeo/domain.hpp"
#include "laeo/headmap.hpp"
#include "laeo/image.hpp"
#include "laeo/nn/tensor.hpp"
#include "laeo/rng.hpp"
#include "laeo/tracker.hpp"

namespace laeo::synth {

inline constexpr std::size_t kCropSide = 64;
inline constexpr double kDeg = M_PI / 180.0;

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 scaled(const Vec3& a, double s) { return {a[0] * s, a[1] * s, a[2] * s}; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline Vec3 unit(const Vec3& a) { return scaled(a, 1.0 / norm(a)); }

inline double angle_deg(const Vec3& a, const Vec3& b) {
  return std::acos(std::clamp(dot(a, b) / (norm(a) * norm(b)), -1.0, 1.0)) / kDeg;
}

// Facing direction in camera space (x right, y down, z away from the
// camera). Yaw 0 faces the camera; positive yaw faces image right.
inline Vec3 gaze_dir(const HeadPose& p) {
  const double a = p.yaw * kDeg, b = p.pitch * kDeg;
  return {std::sin(a) * std::cos(b), -std::sin(b), -std::cos(a) * std::cos(b)};
}

// Inverse of gaze_dir for yaw and pitch.
inline HeadPose pose_from_dir(const Vec3& g, double roll = 0.0) {
  const Vec3 u = unit(g);
  return {std::atan2(u[0], -u[2]) / kDeg, std::asin(std::clamp(-u[1], -1.0, 1.0)) / kDeg, roll};
}

// Pinhole camera used to lift normalized head boxes into 3D.
struct Camera {
  FrameSize frame{640, 360};
  double focal_px = 400.0;
  double head_height_m = 0.25;
};

struct SyntheticHead {
  double x = 0.5, y = 0.5;  // normalized center
  double scale = 0.1;       // box height / frame height
  HeadPose pose;
  std::uint64_t seed = 0;
  bool mirrored = false;  // crop is the horizontal flip of the unmirrored render

  BoundingBox box(const FrameSize& f) const {
    const double h = scale * f.height;
    return BoundingBox::from_center(x * f.width, y * f.height, h, h);
  }
};

inline Vec3 head_position(const SyntheticHead& h, const Camera& cam) {
  const double box_px = h.scale * cam.frame.height;
  const double z = cam.focal_px * cam.head_height_m / box_px;
  const double u = h.x * cam.frame.width - 0.5 * cam.frame.width;
  const double v = h.y * cam.frame.height - 0.5 * cam.frame.height;
  return {u * z / cam.focal_px, v * z / cam.focal_px, z};
}

inline SyntheticHead head_at(const Vec3& p, const HeadPose& pose, const Camera& cam, std::uint64_t seed = 0) {
  SyntheticHead h;
  h.x = (0.5 * cam.frame.width + cam.focal_px * p[0] / p[2]) / cam.frame.width;
  h.y = (0.5 * cam.frame.height + cam.focal_px * p[1] / p[2]) / cam.frame.height;
  h.scale = cam.focal_px * cam.head_height_m / p[2] / cam.frame.height;
  h.pose = pose;
  h.seed = seed;
  return h;
}

struct OracleConfig {
  double tau_deg = 15.0;
  void validate() const { require(tau_deg > 0 && tau_deg < 90, "oracle tolerance must be in (0, 90)"); }
};

// Slack on the angular comparison so that configurations constructed to sit
// exactly on the tolerance count as inside it.
inline constexpr double kAngleSlackDeg = 1e-9;

// Mutual gaze: each head's facing direction points at the other within tau.
inline LAEOLabel gaze_oracle(const SyntheticHead& a, const SyntheticHead& b, const OracleConfig& cfg = {},
                             const Camera& cam = {}) {
  cfg.validate();
  const Vec3 pa = head_position(a, cam), pb = head_position(b, cam);
  const Vec3 ab = sub(pb, pa);
  require(norm(ab) > 1e-12, "gaze oracle: coincident head centers");
  const bool a_ok = angle_deg(gaze_dir(a.pose), ab) <= cfg.tau_deg + kAngleSlackDeg;
  const bool b_ok = angle_deg(gaze_dir(b.pose), scaled(ab, -1.0)) <= cfg.tau_deg + kAngleSlackDeg;
  return a_ok && b_ok ? LAEOLabel::LAEO : LAEOLabel::NotLAEO;
}

// Mirror image of a head's appearance: yaw and roll change sign, position is kept.
inline SyntheticHead mirror_head(SyntheticHead h) {
  h.pose.yaw = -h.pose.yaw;
  h.pose.roll = -h.pose.roll;
  h.mirrored = !h.mirrored;
  return h;
}

// ---- procedural crops -------------------------------------------------------

struct RenderConfig {
  double resolution_per_px = 1.0;  // render resolution relative to the box height in pixels
  int min_resolution = 12;
  double noise_sigma = 0.04;
};

inline void flip_horizontal(float* img, std::size_t side, std::size_t channels) {
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side / 2; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        std::swap(img[(y * side + x) * channels + c], img[(y * side + side - 1 - x) * channels + c]);
}

namespace detail {

// Head as a shaded sphere: a skin-colored face cap around the facing
// direction, a nose highlight and two eye spots, hair elsewhere.
inline void render_sphere(float* out, std::size_t res, const HeadPose& pose, Rng& rng) {
  const std::array<float, 3> bg{float(rng.uniform(0.3, 0.7)), float(rng.uniform(0.3, 0.7)), float(rng.uniform(0.3, 0.7))};
  const std::array<float, 3> skin{0.92f, 0.72f, 0.56f}, hair{0.22f, 0.15f, 0.10f};
  const Vec3 face{std::sin(pose.yaw * kDeg) * std::cos(pose.pitch * kDeg), -std::sin(pose.pitch * kDeg),
                  std::cos(pose.yaw * kDeg) * std::cos(pose.pitch * kDeg)};
  auto eye = [&](double dyaw) {
    const double a = (pose.yaw + dyaw) * kDeg, b = (pose.pitch + 12.0) * kDeg;
    return Vec3{std::sin(a) * std::cos(b), -std::sin(b), std::cos(a) * std::cos(b)};
  };
  const Vec3 eye_l = eye(-28.0), eye_r = eye(28.0);
  const double cr = std::cos(pose.roll * kDeg), sr = std::sin(pose.roll * kDeg);
  const double radius = 0.42;
  for (std::size_t y = 0; y < res; ++y) {
    for (std::size_t x = 0; x < res; ++x) {
      float* px = out + (y * res + x) * 3;
      const double u = ((double(x) + 0.5) / double(res) - 0.5) / radius;
      const double v = ((double(y) + 0.5) / double(res) - 0.5) / radius;
      // Undo the in-plane roll.
      const double ur = cr * u + sr * v, vr = -sr * u + cr * v;
      const double r2 = ur * ur + vr * vr;
      if (r2 >= 1.0) {
        for (int c = 0; c < 3; ++c) px[c] = bg[std::size_t(c)];
        continue;
      }
      const Vec3 n{ur, vr, std::sqrt(1.0 - r2)};
      std::array<float, 3> col = dot(n, face) > std::cos(75 * kDeg) ? skin : hair;
      if (dot(n, face) > std::cos(14 * kDeg)) col = {0.98f, 0.55f, 0.45f};
      if (dot(n, eye_l) > std::cos(9 * kDeg) || dot(n, eye_r) > std::cos(9 * kDeg)) col = {0.05f, 0.05f, 0.08f};
      const float shade = float(0.55 + 0.45 * n[2]);
      for (int c = 0; c < 3; ++c) px[c] = col[std::size_t(c)] * shade;
    }
  }
}

inline void resize_bilinear(const float* src, std::size_t sres, float* dst, std::size_t dres) {
  const double ratio = double(sres) / double(dres);
  for (std::size_t y = 0; y < dres; ++y) {
    const double sy = std::clamp((double(y) + 0.5) * ratio - 0.5, 0.0, double(sres - 1));
    const std::size_t y0 = std::size_t(sy), y1 = std::min(y0 + 1, sres - 1);
    const float fy = float(sy - double(y0));
    for (std::size_t x = 0; x < dres; ++x) {
      const double sx = std::clamp((double(x) + 0.5) * ratio - 0.5, 0.0, double(sres - 1));
      const std::size_t x0 = std::size_t(sx), x1 = std::min(x0 + 1, sres - 1);
      const float fx = float(sx - double(x0));
      for (std::size_t c = 0; c < 3; ++c) {
        auto at = [&](std::size_t yy, std::size_t xx) { return src[(yy * sres + xx) * 3 + c]; };
        dst[(y * dres + x) * 3 + c] =
            (at(y0, x0) * (1 - fx) + at(y0, x1) * fx) * (1 - fy) + (at(y1, x0) * (1 - fx) + at(y1, x1) * fx) * fy;
      }
    }
  }
}

}  // namespace detail

// 64x64x3 crop of a synthetic head. Deterministic in (pose, seed, box size);
// small heads are rendered at lower resolution and upsampled.
inline nn::Tensor<float> render_crop(const SyntheticHead& h, const RenderConfig& rc = {}, const Camera& cam = {}) {
  const double box_px = h.scale * cam.frame.height;
  const std::size_t res = std::size_t(std::clamp(int(std::lround(box_px * rc.resolution_per_px)), rc.min_resolution, int(kCropSide)));
  Rng rng(derive_seed(h.seed, 0xC409));
  HeadPose pose = h.pose;
  if (h.mirrored) pose = mirror_head(h).pose;
  std::vector<float> low(res * res * 3);
  detail::render_sphere(low.data(), res, pose, rng);
  nn::Tensor<float> out({kCropSide, kCropSide, 3});
  detail::resize_bilinear(low.data(), res, out.data(), kCropSide);
  for (auto& v : out.values()) v = std::clamp(v + float(rc.noise_sigma * rng.normal()), 0.0f, 1.0f);
  if (h.mirrored) flip_horizontal(out.data(), kCropSide, 3);
  return out;
}

// ---- temporal jitter --------------------------------------------------------

struct JitterConfig {
  double shift_px = 2.0;
  double zoom = 0.05;
  double brightness = 0.08;
  double noise_sigma = 0.15;
};

// Indices of the replicas kept bit-identical to the source.
inline std::pair<int, int> middle_pair(int T) { return {(T - 1) / 2, T / 2}; }

// Replicates a [64,64,3] crop into [T,64,64,3]; all frames except the two
// middle ones get a small random shift, zoom, brightness change and noise.
inline nn::Tensor<float> jitter_sequence(const nn::Tensor<float>& crop, int T, std::uint64_t seed,
                                         const JitterConfig& jc = {}) {
  require(T >= 1, "T must be >= 1");
  require(crop.shape() == nn::Shape({kCropSide, kCropSide, 3}), "crop must be 64x64x3");
  const std::size_t frame = crop.size();
  nn::Tensor<float> out({std::size_t(T), kCropSide, kCropSide, 3});
  const auto [m0, m1] = middle_pair(T);
  Rng rng(seed);
  for (int t = 0; t < T; ++t) {
    float* dst = out.data() + std::size_t(t) * frame;
    if (t == m0 || t == m1) {
      std::copy(crop.data(), crop.data() + frame, dst);
      continue;
    }
    const double sx = rng.uniform(-jc.shift_px, jc.shift_px), sy = rng.uniform(-jc.shift_px, jc.shift_px);
    const double zoom = 1.0 + rng.uniform(-jc.zoom, jc.zoom);
    const float bright = float(rng.uniform(-jc.brightness, jc.brightness));
    image::warp(crop.data(), dst, kCropSide, 3, sx, sy, zoom, image::Border::Clamp);
    // Uniform noise with standard deviation noise_sigma.
    const double half = jc.noise_sigma * std::sqrt(3.0);
    for (std::size_t i = 0; i < frame; ++i) {
      const float noise = half > 0 ? float(rng.uniform(-half, half)) : 0.0f;
      dst[i] = std::clamp(dst[i] + bright + noise, 0.0f, 1.0f);
    }
  }
  return out;
}

// ---- pair records -----------------------------------------------------------

// One training/evaluation unit: a short scene with the target pair (tracks
// 0 = left, 1 = right) and bystanders, plus the appearance of both heads.
struct PairRecord {
  std::string id;
  int label = 0;  // 1 = LAEO
  std::string strategy;
  std::string split;
  std::uint64_t seed = 0;
  FrameSize frame;
  std::vector<HeadTrack> tracks;
  std::optional<SyntheticHead> left_head, right_head;
  nn::Tensor<float> stored_crops;  // [2, S, 64, 64, 3] for ingested data

  int scene_length() const { return tracks.empty() ? 0 : tracks[0].length(); }
};

struct TrackPairSample {
  nn::Tensor<float> crops_left, crops_right;  // [T, 64, 64, 3]
  nn::Tensor<float> headmap;                  // [M, 64, 64, 3]
  int label = 0;
};

struct SynthConfig {
  Camera camera;
  OracleConfig oracle;
  RenderConfig render;
  JitterConfig jitter;
  int scene_frames = 10;
  double box_noise = 0.03;  // per-frame box jitter, fraction of box height
  int max_others = 2;
  double mirror_fraction = 0.5;           // of negatives; the rest are pose-incompatible
  double misdirected_fraction = 0.5;      // of pose-incompatible negatives
  double positive_cone_fraction = 0.7;    // positives deviate at most this * tau from the exact line of sight
  double val_fraction = 0.1;
};

// Source crop for head `which` (0 left, 1 right), either rendered or stored.
inline nn::Tensor<float> source_frames(const PairRecord& r, int which, const SynthConfig& cfg) {
  if (!r.stored_crops.empty()) {
    const auto& s = r.stored_crops;
    const std::size_t frames = s.dim(1), per = s.size() / 2;
    nn::Tensor<float> out({frames, kCropSide, kCropSide, 3});
    std::copy(s.data() + std::size_t(which) * per, s.data() + std::size_t(which + 1) * per, out.data());
    return out;
  }
  const auto& h = which == 0 ? r.left_head : r.right_head;
  require(h.has_value(), "pair record '" + r.id + "' has no appearance data");
  return render_crop(*h, cfg.render, cfg.camera).reshaped({1, kCropSide, kCropSide, 3});
}

// T-frame window starting `offset` frames into the scene; centred by default.
inline tracker::TrackWindow record_window(const PairRecord& r, int T, int offset = -1) {
  const int L = r.scene_length();
  require(T >= 1 && T <= L, "T=" + std::to_string(T) + " exceeds scene length " + std::to_string(L));
  if (offset < 0) offset = headmap::central_offset(L, T);
  require(offset + T <= L, "window runs past the end of the scene");
  const int start = r.tracks[0].start_frame + offset;
  auto w = tracker::make_window(r.tracks[0], r.tracks[1], start, T, r.frame);
  // Roles are fixed by construction, whatever the boxes say.
  if (w.left_track != r.tracks[0].track_id) {
    std::swap(w.left_track, w.right_track);
    std::swap(w.left_boxes, w.right_boxes);
  }
  return w;
}

// Network inputs for one record at track length T and head-map length M.
inline TrackPairSample materialize(const PairRecord& r, int T, int M, const SynthConfig& cfg, int offset = -1) {
  TrackPairSample s;
  s.label = r.label;
  for (int which = 0; which < 2; ++which) {
    auto src = source_frames(r, which, cfg);
    nn::Tensor<float> stack;
    if (src.dim(0) == 1) {
      stack = jitter_sequence(src.reshaped({kCropSide, kCropSide, 3}), T, derive_seed(r.seed, 11 + which), cfg.jitter);
    } else {
      const int S = int(src.dim(0));
      require(S >= T, "stored crop stack shorter than T");
      const int o = offset >= 0 && S == r.scene_length() ? offset : headmap::central_offset(S, T);
      const std::size_t off = std::size_t(o) * kCropSide * kCropSide * 3;
      stack = nn::Tensor<float>({std::size_t(T), kCropSide, kCropSide, 3},
                                std::vector<float>(src.data() + off, src.data() + off + std::size_t(T) * kCropSide * kCropSide * 3));
    }
    (which == 0 ? s.crops_left : s.crops_right) = std::move(stack);
  }
  headmap::HeadMapConfig hc;
  hc.M = M;
  s.headmap = headmap::render_headmap(record_window(r, T, offset), r.tracks, hc);
  return s;
}

// ---- generators -------------------------------------------------------------

namespace detail {

inline Vec3 sample_position(Rng& rng, const Camera& cam) {
  for (;;) {
    const double z = rng.uniform(2.0, 7.0);
    const Vec3 p{rng.uniform(-0.75, 0.75) * z * cam.frame.width / (2 * cam.focal_px),
                 rng.uniform(-0.25, 0.25) * z * cam.frame.height / (2 * cam.focal_px) + rng.uniform(-0.05, 0.05), z};
    const double margin = 0.5 * cam.focal_px * cam.head_height_m / z;
    const double u = 0.5 * cam.frame.width + cam.focal_px * p[0] / z;
    const double v = 0.5 * cam.frame.height + cam.focal_px * p[1] / z;
    if (u > margin && u < cam.frame.width - margin && v > margin && v < cam.frame.height - margin) return p;
  }
}

inline bool well_separated(const std::vector<SyntheticHead>& heads, const SyntheticHead& h, const FrameSize& f) {
  for (const auto& o : heads)
    if (tracker::iou(o.box(f), h.box(f)) > 0.0 || std::abs(o.x - h.x) * f.width < 0.5 * (o.scale + h.scale) * f.height)
      return false;
  return true;
}

// Unit vector within `max_deg` of `axis`, uniform in angle.
inline Vec3 perturb(const Vec3& axis, double max_deg, Rng& rng) {
  const Vec3 a = unit(axis);
  Vec3 helper = std::abs(a[1]) < 0.9 ? Vec3{0, 1, 0} : Vec3{1, 0, 0};
  const Vec3 e1 = unit(cross(a, helper)), e2 = cross(a, e1);
  const double phi = rng.uniform(0, 2 * M_PI), th = rng.uniform(0, max_deg) * kDeg;
  const Vec3 side = {std::cos(phi) * e1[0] + std::sin(phi) * e2[0], std::cos(phi) * e1[1] + std::sin(phi) * e2[1],
                     std::cos(phi) * e1[2] + std::sin(phi) * e2[2]};
  return unit({std::cos(th) * a[0] + std::sin(th) * side[0], std::cos(th) * a[1] + std::sin(th) * side[1],
               std::cos(th) * a[2] + std::sin(th) * side[2]});
}

inline Vec3 deviate(const Vec3& axis, double lo_deg, double hi_deg, Rng& rng) {
  const Vec3 a = unit(axis);
  Vec3 helper = std::abs(a[1]) < 0.9 ? Vec3{0, 1, 0} : Vec3{1, 0, 0};
  const Vec3 e1 = unit(cross(a, helper)), e2 = cross(a, e1);
  const double phi = rng.uniform(0, 2 * M_PI), th = rng.uniform(lo_deg, hi_deg) * kDeg;
  Vec3 out;
  for (int i = 0; i < 3; ++i)
    out[std::size_t(i)] = std::cos(th) * a[std::size_t(i)] +
                          std::sin(th) * (std::cos(phi) * e1[std::size_t(i)] + std::sin(phi) * e2[std::size_t(i)]);
  return unit(out);
}

// Horizontal component of the line of sight large enough that mirroring
// either head's yaw moves its gaze more than 2*tau away.
inline bool mirror_breakable(const Vec3& pa, const Vec3& pb, double tau) {
  return std::abs(unit(sub(pb, pa))[0]) >= std::sin((2 * tau + 5.0) * kDeg);
}

inline double clamp_angle(double a, double lim) { return std::clamp(a, -lim, lim); }

}  // namespace detail

// Positions a and b for a pair whose line of sight is mirror-breakable.
inline std::pair<Vec3, Vec3> sample_pair_positions(Rng& rng, const SynthConfig& cfg, bool need_breakable) {
  for (;;) {
    const Vec3 pa = detail::sample_position(rng, cfg.camera), pb = detail::sample_position(rng, cfg.camera);
    SyntheticHead ha = head_at(pa, {}, cfg.camera), hb = head_at(pb, {}, cfg.camera);
    if (!detail::well_separated({ha}, hb, cfg.camera.frame)) continue;
    if (need_breakable && !detail::mirror_breakable(pa, pb, cfg.oracle.tau_deg)) continue;
    return {pa, pb};
  }
}

// Heads a, b looking at each other within the positive cone.
inline std::pair<SyntheticHead, SyntheticHead> sample_positive(Rng& rng, const SynthConfig& cfg) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    auto [pa, pb] = sample_pair_positions(rng, cfg, true);
    const double cone = cfg.positive_cone_fraction * cfg.oracle.tau_deg;
    const Vec3 ga = detail::perturb(sub(pb, pa), cone, rng), gb = detail::perturb(sub(pa, pb), cone, rng);
    auto a = head_at(pa, pose_from_dir(ga, rng.uniform(-25, 25)), cfg.camera, rng.next_u64());
    auto b = head_at(pb, pose_from_dir(gb, rng.uniform(-25, 25)), cfg.camera, rng.next_u64());
    if (gaze_oracle(a, b, cfg.oracle, cfg.camera) == LAEOLabel::LAEO) return {a, b};
  }
  throw ValidationError("could not sample a LAEO pair in 1000 attempts");
}

enum class NegativeStrategy { Mirror, SameDirection, Misdirected };

inline std::string_view to_string(NegativeStrategy s) {
  switch (s) {
    case NegativeStrategy::Mirror: return "mirror";
    case NegativeStrategy::SameDirection: return "same_direction";
    case NegativeStrategy::Misdirected: return "misdirected";
  }
  return "?";
}

inline std::pair<SyntheticHead, SyntheticHead> sample_negative(Rng& rng, const SynthConfig& cfg, NegativeStrategy s) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    SyntheticHead a, b;
    if (s == NegativeStrategy::Mirror) {
      std::tie(a, b) = sample_positive(rng, cfg);
      if (rng.bernoulli(0.5))
        a = mirror_head(a);
      else
        b = mirror_head(b);
    } else if (s == NegativeStrategy::SameDirection) {
      auto [pa, pb] = sample_pair_positions(rng, cfg, false);
      const double dir = rng.bernoulli(0.5) ? 1.0 : -1.0;
      const double ya = dir * rng.uniform(35, 145);
      const double yb = dir * std::clamp(std::abs(ya) + rng.uniform(-30, 30), 35.0, 145.0);
      if (std::abs(ya - yb) > 30.0) continue;
      a = head_at(pa, {ya, rng.uniform(-20, 20), rng.uniform(-25, 25)}, cfg.camera, rng.next_u64());
      b = head_at(pb, {yb, rng.uniform(-20, 20), rng.uniform(-25, 25)}, cfg.camera, rng.next_u64());
    } else {
      // Roughly facing each other but at least one gaze misses by 3-6 tau.
      auto [pa, pb] = sample_pair_positions(rng, cfg, true);
      const double tau = cfg.oracle.tau_deg;
      Vec3 ga = detail::deviate(sub(pb, pa), 3 * tau, 6 * tau, rng);
      Vec3 gb = detail::perturb(sub(pa, pb), cfg.positive_cone_fraction * tau, rng);
      if (rng.bernoulli(0.5)) std::swap(ga, gb), std::swap(pa, pb);
      a = head_at(pa, pose_from_dir(ga, rng.uniform(-25, 25)), cfg.camera, rng.next_u64());
      b = head_at(pb, pose_from_dir(gb, rng.uniform(-25, 25)), cfg.camera, rng.next_u64());
    }
    if (gaze_oracle(a, b, cfg.oracle, cfg.camera) == LAEOLabel::NotLAEO) return {a, b};
  }
  throw ValidationError("could not sample a NOT_LAEO pair in 1000 attempts");
}

namespace detail {

inline HeadTrack static_track(int id, const std::string& video, const SyntheticHead& h, int frames, double noise,
                              const FrameSize& f, Rng& rng) {
  HeadTrack t{id, video, 0, {}};
  const BoundingBox base = h.box(f);
  const double s = noise * base.height();
  for (int k = 0; k < frames; ++k) {
    const double dx = s * rng.normal(), dy = s * rng.normal(), ds = s * rng.normal();
    // Six-decimal grid, so stored datasets reproduce the scene exactly.
    auto q = [](double v) { return std::round(v * 1e6) / 1e6; };
    t.boxes.push_back(BoundingBox{q(base.x1 + dx - ds), q(base.y1 + dy - ds), q(base.x2 + dx + ds), q(base.y2 + dy + ds)});
  }
  return t;
}

}  // namespace detail

// Builds a full record: the pair (ordered left/right by image x), bystanders,
// and per-frame boxes. Every emitted label is re-checked by the oracle.
inline PairRecord make_pair(std::uint64_t seed, LAEOLabel want, const SynthConfig& cfg = {},
                            std::optional<NegativeStrategy> strategy = std::nullopt) {
  require(want != LAEOLabel::Ambiguous, "synthetic pairs are LAEO or NOT_LAEO");
  Rng rng(seed);
  PairRecord r;
  r.seed = seed;
  r.frame = cfg.camera.frame;
  r.label = want == LAEOLabel::LAEO ? 1 : 0;
  SyntheticHead a, b;
  if (want == LAEOLabel::LAEO) {
    std::tie(a, b) = sample_positive(rng, cfg);
    r.strategy = "positive";
  } else {
    NegativeStrategy s;
    if (strategy) {
      s = *strategy;
    } else if (rng.bernoulli(cfg.mirror_fraction)) {
      s = NegativeStrategy::Mirror;
    } else {
      s = rng.bernoulli(cfg.misdirected_fraction) ? NegativeStrategy::Misdirected : NegativeStrategy::SameDirection;
    }
    std::tie(a, b) = sample_negative(rng, cfg, s);
    r.strategy = std::string(to_string(s));
  }
  require(gaze_oracle(a, b, cfg.oracle, cfg.camera) == want, "oracle disagrees with generated label");
  if (a.x > b.x) std::swap(a, b);
  r.left_head = a;
  r.right_head = b;

  std::vector<SyntheticHead> placed{a, b};
  const int others = int(rng.index(std::size_t(cfg.max_others + 1)));
  std::vector<SyntheticHead> bystanders;
  for (int k = 0, tries = 0; k < others && tries < 50; ++tries) {
    auto h = head_at(detail::sample_position(rng, cfg.camera), {}, cfg.camera);
    if (!detail::well_separated(placed, h, cfg.camera.frame)) continue;
    placed.push_back(h);
    bystanders.push_back(h);
    ++k;
  }
  r.tracks.push_back(detail::static_track(0, "", a, cfg.scene_frames, cfg.box_noise, r.frame, rng));
  r.tracks.push_back(detail::static_track(1, "", b, cfg.scene_frames, cfg.box_noise, r.frame, rng));
  for (std::size_t k = 0; k < bystanders.size(); ++k)
    r.tracks.push_back(detail::static_track(int(k) + 2, "", bystanders[k], cfg.scene_frames, cfg.box_noise, r.frame, rng));
  // Keep role order stable even if box noise crosses centers.
  return r;
}

struct Dataset {
  std::vector<PairRecord> records;

  std::vector<const PairRecord*> split(std::string_view name) const {
    std::vector<const PairRecord*> out;
    for (const auto& r : records)
      if (r.split == name) out.push_back(&r);
    return out;
  }
  std::size_t count_label(int label) const {
    return std::size_t(std::count_if(records.begin(), records.end(), [&](const PairRecord& r) { return r.label == label; }));
  }
};

// n_pos positives and n_neg negatives with per-sample seeds derived from
// (seed, index), shuffled, and split train/val by val_fraction.
inline Dataset generate_dataset(std::size_t n_pos, std::size_t n_neg, std::uint64_t seed, const SynthConfig& cfg = {}) {
  Dataset ds;
  const std::size_t n = n_pos + n_neg;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t n_val = std::size_t(std::llround(cfg.val_fraction * double(n)));
  ds.records.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    const auto want = i < n_pos ? LAEOLabel::LAEO : LAEOLabel::NotLAEO;
    PairRecord r = make_pair(derive_seed(seed, i), want, cfg);
    char id[32];
    std::snprintf(id, sizeof id, "s%06zu", k);
    r.id = id;
    for (auto& t : r.tracks) t.video_id = r.id;
    r.split = k < n - n_val ? "train" : "val";
    ds.records.push_back(std::move(r));
  }
  return ds;
}

// Pose-regression data for head-branch pre-training.
struct PoseSample {
  nn::Tensor<float> crops;  // [T, 64, 64, 3]
  HeadPose pose;
};

inline std::vector<PoseSample> generate_pose_dataset(std::size_t n, int T, std::uint64_t seed, const SynthConfig& cfg = {}) {
  std::vector<PoseSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    SyntheticHead h;
    h.scale = rng.uniform(0.04, 0.14);
    h.pose = {rng.uniform(-150, 150), rng.uniform(-45, 45), rng.uniform(-30, 30)};
    h.seed = rng.next_u64();
    out.push_back({jitter_sequence(render_crop(h, cfg.render, cfg.camera), T, rng.next_u64(), cfg.jitter), h.pose});
  }
  return out;
}

}  // namespace laeo::synth
