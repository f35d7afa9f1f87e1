#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

#include "laeo/nn/tensor.hpp"

namespace laeo::image {

enum class Border { Zero, Clamp };

// Similarity warp of one [side, side, C] plane about its center: output
// pixel p samples the source at center + (p - center - shift) / zoom.
inline void warp(const float* src, float* dst, std::size_t side, std::size_t channels, double shift_x,
                 double shift_y, double zoom, Border border) {
  const double c = 0.5 * static_cast<double>(side - 1);
  const long n = static_cast<long>(side);
  auto fetch = [&](long y, long x, std::size_t ch) -> float {
    if (x < 0 || y < 0 || x >= n || y >= n) {
      if (border == Border::Zero) return 0.0f;
      x = std::clamp(x, 0L, n - 1);
      y = std::clamp(y, 0L, n - 1);
    }
    return src[(static_cast<std::size_t>(y) * side + static_cast<std::size_t>(x)) * channels + ch];
  };
  for (std::size_t y = 0; y < side; ++y) {
    for (std::size_t x = 0; x < side; ++x) {
      const double sx = c + (static_cast<double>(x) - c - shift_x) / zoom;
      const double sy = c + (static_cast<double>(y) - c - shift_y) / zoom;
      const long x0 = static_cast<long>(std::floor(sx)), y0 = static_cast<long>(std::floor(sy));
      const float fx = static_cast<float>(sx - x0), fy = static_cast<float>(sy - y0);
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const float top = fetch(y0, x0, ch) * (1 - fx) + fetch(y0, x0 + 1, ch) * fx;
        const float bot = fetch(y0 + 1, x0, ch) * (1 - fx) + fetch(y0 + 1, x0 + 1, ch) * fx;
        dst[(y * side + x) * channels + ch] = top * (1 - fy) + bot * fy;
      }
    }
  }
}

// Binary PPM (P6) of frame `f` of an [F, H, W, 3] tensor; values in [0,1]
// are scaled by 255 and rounded.
inline std::string to_ppm(const nn::Tensor<float>& t, std::size_t f) {
  require(t.rank() == 4 && t.dim(3) == 3, "PPM export expects an [F,H,W,3] tensor");
  require(f < t.dim(0), "PPM export frame out of range");
  const std::size_t h = t.dim(1), w = t.dim(2);
  std::string out = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  const float* p = t.data() + f * h * w * 3;
  for (std::size_t i = 0; i < h * w * 3; ++i) {
    const float v = std::clamp(p[i], 0.0f, 1.0f);
    out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0f))));
  }
  return out;
}

}  // namespace laeo::image
