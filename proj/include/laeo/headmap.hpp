#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "laeo/domain.hpp"
#include "laeo/nn/tensor.hpp"
#include "laeo/tracker.hpp"

namespace laeo::headmap {

// Channel layout of a head-map frame.
inline constexpr std::size_t kOthers = 0;
inline constexpr std::size_t kRight = 1;
inline constexpr std::size_t kLeft = 2;

struct HeadMapConfig {
  int side = 64;
  int M = 10;
  double sigma_ratio = 0.5;  // sigma = ratio * max(box_w, box_h) / 2, in grid pixels
  double cutoff = 3.0;       // render radius in sigmas

  void validate() const {
    require(side == 64, "head-map side is fixed at 64");
    require(M >= 1, "head-map length M must be >= 1");
    require(sigma_ratio > 0, "sigma_ratio must be > 0");
    require(cutoff > 0, "cutoff must be > 0");
  }
};

// Uniform, aspect-preserving frame -> grid mapping. Grid pixel j sits at
// coordinate j, so the frame center lands on pixel side/2.
struct GridMapping {
  double scale = 1, ox = 0, oy = 0;

  static GridMapping of(const FrameSize& f, int side) {
    require(f.width > 0 && f.height > 0, "frame size must be positive");
    GridMapping m;
    m.scale = double(side) / std::max(f.width, f.height);
    m.ox = 0.5 * (side - f.width * m.scale);
    m.oy = 0.5 * (side - f.height * m.scale);
    return m;
  }
  double gx(double x) const { return ox + x * scale; }
  double gy(double y) const { return oy + y * scale; }
};

inline double blob_sigma(const BoundingBox& b, const GridMapping& m, const HeadMapConfig& cfg) {
  return cfg.sigma_ratio * std::max(b.width(), b.height()) * m.scale / 2.0;
}

// Max-composites one Gaussian (peak 1 at the box center) into `plane`, an
// [side, side, 3] slice, on channel `ch`.
inline void draw_blob(float* plane, std::size_t ch, const BoundingBox& b, const GridMapping& m,
                      const HeadMapConfig& cfg) {
  const double cx = m.gx(b.cx()), cy = m.gy(b.cy());
  const double sigma = blob_sigma(b, m, cfg);
  const double radius = cfg.cutoff * sigma;
  const int side = cfg.side;
  const int x0 = std::max(0, int(std::ceil(cx - radius))), x1 = std::min(side - 1, int(std::floor(cx + radius)));
  const int y0 = std::max(0, int(std::ceil(cy - radius))), y1 = std::min(side - 1, int(std::floor(cy + radius)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      if (d2 > radius * radius) continue;
      const float v = static_cast<float>(std::exp(-d2 / (2 * sigma * sigma)));
      float& dst = plane[(std::size_t(y) * side + std::size_t(x)) * 3 + ch];
      dst = std::max(dst, v);
    }
  }
}

// Offset (within a window of length T) of the first of the M central frames.
inline int central_offset(int T, int M) {
  require(M >= 1 && M <= T, "head-map length M must be in [1, T]");
  return std::clamp(T / 2 - M / 2, 0, T - M);
}

// M x side x side x 3 map of the window's central M frames. Heads of
// `all_tracks` other than the pair go to the "others" channel.
inline nn::Tensor<float> render_headmap(const tracker::TrackWindow& w, const std::vector<HeadTrack>& all_tracks,
                                        const HeadMapConfig& cfg) {
  cfg.validate();
  require(int(w.left_boxes.size()) == w.length && int(w.right_boxes.size()) == w.length,
          "window is missing pair boxes on some frames");
  const int first = w.start + central_offset(w.length, cfg.M);
  const auto m = GridMapping::of(w.frame, cfg.side);
  const std::size_t side = std::size_t(cfg.side);
  nn::Tensor<float> out({std::size_t(cfg.M), side, side, 3});
  for (int k = 0; k < cfg.M; ++k) {
    const int f = first + k;
    float* plane = out.data() + std::size_t(k) * side * side * 3;
    for (const auto& t : all_tracks) {
      if (t.video_id != w.video_id || t.track_id == w.left_track || t.track_id == w.right_track) continue;
      if (t.alive(f)) draw_blob(plane, kOthers, t.box_at(f), m, cfg);
    }
    draw_blob(plane, kRight, w.right_at(f), m, cfg);
    draw_blob(plane, kLeft, w.left_at(f), m, cfg);
  }
  return out;
}

struct GeometryFeatures {
  double dx = 0, dy = 0, s_r = 1;
};

// Left-to-right center offset in a (1,1)-normalized frame and the ratio of
// normalized head heights, at the window's central frame.
inline GeometryFeatures geometry_features(const tracker::TrackWindow& w) {
  const int c = w.central_frame();
  const auto& l = w.left_at(c);
  const auto& r = w.right_at(c);
  require(l.height() > 0 && r.height() > 0, "geometry features need positive box heights");
  const double W = w.frame.width, H = w.frame.height;
  return {(r.cx() - l.cx()) / W, (r.cy() - l.cy()) / H, (l.height() / H) / (r.height() / H)};
}

}  // namespace laeo::headmap
