#include <gtest/gtest.h>

#include <cmath>

#include "laeo/headmap.hpp"
#include "laeo/image.hpp"

using namespace laeo;
using headmap::HeadMapConfig;

namespace {

HeadTrack track_at(int id, double cx, double cy, double size, int len = 10, double vx = 0) {
  HeadTrack t{id, "v", 0, {}};
  for (int f = 0; f < len; ++f) t.boxes.push_back(BoundingBox::from_center(cx + vx * f, cy, size, size));
  return t;
}

double channel_max(const nn::Tensor<float>& m, std::size_t frame, std::size_t ch, int* ax = nullptr, int* ay = nullptr) {
  double best = -1;
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) {
      const double v = m.at({frame, y, x, ch});
      if (v > best) {
        best = v;
        if (ax) *ax = int(x);
        if (ay) *ay = int(y);
      }
    }
  return best;
}

std::pair<double, double> centroid(const nn::Tensor<float>& m, std::size_t frame, std::size_t ch) {
  double sx = 0, sy = 0, s = 0;
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) {
      const double v = m.at({frame, y, x, ch});
      sx += v * double(x);
      sy += v * double(y);
      s += v;
    }
  return {sx / s, sy / s};
}

std::size_t support(const nn::Tensor<float>& m, std::size_t frame, std::size_t ch) {
  std::size_t n = 0;
  for (std::size_t y = 0; y < 64; ++y)
    for (std::size_t x = 0; x < 64; ++x) n += m.at({frame, y, x, ch}) > 0.0f;
  return n;
}

}  // namespace

TEST(HeadMap, NoOthersMeansEmptyChannelZero) {
  std::vector<HeadTrack> tracks{track_at(0, 200, 180, 60), track_at(1, 400, 180, 60)};
  auto w = tracker::make_window(tracks[0], tracks[1], 0, 10);
  auto m = headmap::render_headmap(w, tracks, {});
  EXPECT_EQ(m.shape(), (nn::Shape{10, 64, 64, 3}));
  for (std::size_t f = 0; f < 10; ++f) EXPECT_EQ(channel_max(m, f, headmap::kOthers), 0.0);
  for (float v : m.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(HeadMap, LeftHeadAtFrameCenterPeaksAtGridCenter) {
  // 640x360 letterboxes to rows 14..50; the frame center maps to (32, 32).
  std::vector<HeadTrack> tracks{track_at(0, 320, 180, 50), track_at(1, 500, 180, 50)};
  auto w = tracker::make_window(tracks[0], tracks[1], 0, 10);
  ASSERT_EQ(w.left_track, 0);
  HeadMapConfig cfg;
  cfg.M = 1;
  auto m = headmap::render_headmap(w, tracks, cfg);
  int x = 0, y = 0;
  EXPECT_FLOAT_EQ(float(channel_max(m, 0, headmap::kLeft, &x, &y)), 1.0f);
  EXPECT_LE(std::abs(x - 32), 0);
  EXPECT_LE(std::abs(y - 32), 0);
}

TEST(HeadMap, IntensityAtOneSigma) {
  // Square 100px frame: scale 0.64. A 20px box (normalized width 0.2) gives
  // sigma = 0.5 * 12.8 / 2 = 3.2 grid px. Centering it at grid x = 28.8
  // places pixel (32, 32) exactly one sigma away.
  std::vector<HeadTrack> tracks{track_at(0, 45, 50, 20), track_at(1, 90, 50, 10)};
  auto w = tracker::make_window(tracks[0], tracks[1], 0, 10, {100, 100});
  HeadMapConfig cfg;
  cfg.M = 1;
  const auto gm = headmap::GridMapping::of(w.frame, 64);
  ASSERT_NEAR(headmap::blob_sigma(tracks[0].boxes[0], gm, cfg), 3.2, 1e-12);
  auto m = headmap::render_headmap(w, tracks, cfg);
  EXPECT_NEAR(m.at({0, 32, 32, headmap::kLeft}), std::exp(-0.5), 1e-6);
  EXPECT_NEAR(std::exp(-0.5), 0.6065, 1e-4);
}

TEST(HeadMap, OthersGoToChannelZero) {
  std::vector<HeadTrack> tracks{track_at(0, 100, 180, 50), track_at(1, 500, 180, 50), track_at(2, 300, 100, 40)};
  auto w = tracker::make_window(tracks[0], tracks[1], 0, 10);
  auto m = headmap::render_headmap(w, tracks, {});
  EXPECT_FLOAT_EQ(float(channel_max(m, 0, headmap::kOthers)), 1.0f);
  auto [cx, cy] = centroid(m, 0, headmap::kOthers);
  EXPECT_NEAR(cx, 30.0, 0.5);
  EXPECT_NEAR(cy, 24.0, 0.5);
}

TEST(HeadMap, TranslationConsistency) {
  const double dx = 37, dy = -23;  // frame pixels; grid shift is 0.1x
  std::vector<HeadTrack> a{track_at(0, 200, 180, 60), track_at(1, 420, 200, 40), track_at(2, 320, 150, 30)};
  std::vector<HeadTrack> b = a;
  for (auto& t : b)
    for (auto& box : t.boxes) box = box.translated(dx, dy);
  auto ma = headmap::render_headmap(tracker::make_window(a[0], a[1], 0, 10), a, {});
  auto mb = headmap::render_headmap(tracker::make_window(b[0], b[1], 0, 10), b, {});
  for (std::size_t ch = 0; ch < 3; ++ch) {
    auto [ax, ay] = centroid(ma, 0, ch);
    auto [bx, by] = centroid(mb, 0, ch);
    EXPECT_NEAR(bx - ax, dx * 0.1, 0.5);
    EXPECT_NEAR(by - ay, dy * 0.1, 0.5);
  }
}

TEST(HeadMap, LargerBoxesHaveLargerSupport) {
  std::size_t prev = 0;
  for (double size : {20.0, 40.0, 60.0, 90.0}) {
    std::vector<HeadTrack> t{track_at(0, 200, 180, size), track_at(1, 450, 180, 30)};
    auto m = headmap::render_headmap(tracker::make_window(t[0], t[1], 0, 10), t, {});
    const std::size_t s = support(m, 0, headmap::kLeft);
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST(HeadMap, SwappingRolesSwapsChannels) {
  std::vector<HeadTrack> t{track_at(0, 200, 180, 60), track_at(1, 420, 200, 40), track_at(2, 320, 150, 30)};
  auto w = tracker::make_window(t[0], t[1], 0, 10);
  auto swapped = w;
  std::swap(swapped.left_track, swapped.right_track);
  std::swap(swapped.left_boxes, swapped.right_boxes);
  auto a = headmap::render_headmap(w, t, {});
  auto b = headmap::render_headmap(swapped, t, {});
  for (std::size_t i = 0; i < a.size(); i += 3) {
    EXPECT_EQ(a[i + 0], b[i + 0]);
    EXPECT_EQ(a[i + 1], b[i + 2]);
    EXPECT_EQ(a[i + 2], b[i + 1]);
  }
}

TEST(HeadMap, CentralFramesAreSelected) {
  EXPECT_EQ(headmap::central_offset(10, 1), 5);
  EXPECT_EQ(headmap::central_offset(10, 5), 3);
  EXPECT_EQ(headmap::central_offset(10, 10), 0);
  EXPECT_EQ(headmap::central_offset(1, 1), 0);
  EXPECT_THROW(headmap::central_offset(5, 10), ValidationError);

  // A head moving 10px per frame: M=1 renders frame 5 only.
  std::vector<HeadTrack> t{track_at(0, 100, 180, 50, 10, 10.0), track_at(1, 500, 180, 50)};
  HeadMapConfig cfg;
  cfg.M = 1;
  auto m = headmap::render_headmap(tracker::make_window(t[0], t[1], 0, 10), t, cfg);
  EXPECT_NEAR(centroid(m, 0, headmap::kLeft).first, 0.1 * 150, 0.5);
}

TEST(HeadMap, WindowMissingBoxesThrows) {
  std::vector<HeadTrack> t{track_at(0, 100, 180, 50), track_at(1, 500, 180, 50)};
  auto w = tracker::make_window(t[0], t[1], 0, 10);
  w.left_boxes.pop_back();
  EXPECT_THROW(headmap::render_headmap(w, t, {}), ValidationError);
  EXPECT_THROW(tracker::make_window(t[0], t[1], 5, 10), ValidationError);
}

namespace {
tracker::TrackWindow geometry_window(double lx, double ly, double ls, double rx, double ry, double rs) {
  // Normalized centers and heights on a 1000x1000 frame.
  HeadTrack l{0, "v", 0, {BoundingBox::from_center(lx * 1000, ly * 1000, ls * 1000, ls * 1000)}};
  HeadTrack r{1, "v", 0, {BoundingBox::from_center(rx * 1000, ry * 1000, rs * 1000, rs * 1000)}};
  return tracker::make_window(l, r, 0, 1, {1000, 1000});
}
}  // namespace

TEST(Geometry, DirectArithmetic) {
  auto g = headmap::geometry_features(geometry_window(0.2, 0.5, 0.1, 0.6, 0.5, 0.2));
  EXPECT_NEAR(g.dx, 0.4, 1e-12);
  EXPECT_NEAR(g.dy, 0.0, 1e-12);
  EXPECT_NEAR(g.s_r, 0.5, 1e-12);
}

TEST(Geometry, CoincidentEqualHeads) {
  auto g = headmap::geometry_features(geometry_window(0.5, 0.5, 0.1, 0.5, 0.5, 0.1));
  EXPECT_EQ(g.dx, 0.0);
  EXPECT_EQ(g.dy, 0.0);
  EXPECT_EQ(g.s_r, 1.0);
}

TEST(Geometry, MirroredSceneSwapsRoles) {
  auto g = headmap::geometry_features(geometry_window(0.2, 0.5, 0.1, 0.6, 0.5, 0.2));
  auto m = headmap::geometry_features(geometry_window(1 - 0.2, 0.5, 0.1, 1 - 0.6, 0.5, 0.2));
  EXPECT_NEAR(m.dx, g.dx, 1e-12);
  EXPECT_NEAR(m.dy, g.dy, 1e-12);
  EXPECT_NEAR(m.s_r, 1.0 / g.s_r, 1e-12);
  // With a vertical offset, mirroring negates dy.
  auto g2 = headmap::geometry_features(geometry_window(0.2, 0.4, 0.1, 0.6, 0.6, 0.2));
  auto m2 = headmap::geometry_features(geometry_window(0.8, 0.4, 0.1, 0.4, 0.6, 0.2));
  EXPECT_NEAR(m2.dy, -g2.dy, 1e-12);
}

TEST(Geometry, ZeroHeightThrows) {
  auto w = geometry_window(0.2, 0.5, 0.1, 0.6, 0.5, 0.2);
  w.left_boxes[0].y2 = w.left_boxes[0].y1;
  EXPECT_THROW(headmap::geometry_features(w), ValidationError);
}

TEST(HeadMapExport, PpmIsRounded) {
  nn::Tensor<float> t({1, 2, 2, 3}, 0.5f);
  t[0] = 1.0f;
  auto ppm = image::to_ppm(t, 0);
  const std::string header = "P6\n2 2\n255\n";
  ASSERT_EQ(ppm.size(), header.size() + 12);
  EXPECT_EQ(ppm.substr(0, header.size()), header);
  EXPECT_EQ(static_cast<unsigned char>(ppm[header.size()]), 255);
  EXPECT_EQ(static_cast<unsigned char>(ppm[header.size() + 1]), 128);
}
