#pragma once

#include <algorithm>
#include <cmath>

#include "laeo/domain.hpp"

namespace laeo::nn {

// Probability clamp applied inside the LAEO cross-entropy.
inline constexpr double kProbEps = 1e-7;

// Angle scales used to bring yaw/pitch/roll to [-1, 1] before the losses.
inline constexpr double kYawScale = 180.0;
inline constexpr double kPitchScale = 90.0;
inline constexpr double kRollScale = 180.0;

// c: ground-truth class (1 = LAEO); p: predicted probability of LAEO.
struct LossSample {
  int c = 0;
  double p = 0.5;
};

// Binary cross-entropy on the LAEO probability.
inline double laeo_loss(const LossSample& s) {
  const double p = std::clamp(s.p, kProbEps, 1.0 - kProbEps);
  return -(s.c * std::log(p) + (1 - s.c) * std::log(1.0 - p));
}

// d laeo_loss / d p; zero where the clamp is active.
inline double laeo_loss_grad(const LossSample& s) {
  if (s.p < kProbEps || s.p > 1.0 - kProbEps) return 0.0;
  return -s.c / s.p + (1 - s.c) / (1.0 - s.p);
}

inline double smooth_l1(double d) {
  const double a = std::abs(d);
  return a < 1.0 ? 0.5 * d * d : a - 0.5;
}

inline double smooth_l1_grad(double d) {
  if (std::abs(d) < 1.0) return d;
  return d > 0 ? 1.0 : -1.0;
}

inline double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

// Penalty for predicting the wrong yaw direction; tanh stands in for the
// sign of the prediction. `pred` is the normalized predicted yaw.
inline double sign_loss(double pred, double gt, double k = 1.0) {
  return std::max(0.0, -sign(gt) * std::tanh(k * pred));
}

inline double sign_loss_grad(double pred, double gt, double k = 1.0) {
  const double t = std::tanh(k * pred);
  if (-sign(gt) * t <= 0.0) return 0.0;
  return -sign(gt) * k * (1.0 - t * t);
}

struct PoseLossWeights {
  double yaw = 0.6, pitch = 0.3, roll = 0.1, sign = 0.1;

  void validate() const {
    require(yaw >= 0 && pitch >= 0 && roll >= 0 && sign >= 0, "pose loss weights must be >= 0");
  }
};

// Weighted smooth-L1 on the three normalized angles plus the yaw sign term.
inline double head_pose_loss(const HeadPose& pred, const HeadPose& gt, const PoseLossWeights& w = {},
                             double k = 1.0) {
  return w.yaw * smooth_l1((pred.yaw - gt.yaw) / kYawScale) +
         w.pitch * smooth_l1((pred.pitch - gt.pitch) / kPitchScale) +
         w.roll * smooth_l1((pred.roll - gt.roll) / kRollScale) +
         w.sign * sign_loss(pred.yaw / kYawScale, gt.yaw, k);
}

}  // namespace laeo::nn
