#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "laeo/model.hpp"
#include "laeo/nn/gradcheck.hpp"

namespace laeo::selfcheck {

using nn::Graph;
using nn::GradCheckReport;
using nn::ParamSet;
using nn::Tensor;

struct NamedReport {
  std::string name;
  GradCheckReport report;
  std::vector<std::string> dead;  // parameters whose gradient is identically zero

  bool passed() const { return report.passed() && dead.empty(); }
};

// T=2, M=2 model with two channels per conv layer.
inline model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.T = 2;
  c.M = 2;
  c.head_channels = {2, 2, 2, 2, 2};
  c.map_channels = {2, 2, 2, 2};
  c.fusion_units = 8;
  return c;
}

namespace detail {

inline Tensor<double> random_tensor(nn::Shape s, Rng& rng, double lo = -1, double hi = 1) {
  Tensor<double> t(std::move(s));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Fixed random projection to a scalar.
inline Graph<double>::Var project(Graph<double>& g, Graph<double>::Var v, std::uint64_t seed) {
  Rng rng(seed);
  Tensor<double> w({g.value(v).size(), 1});
  for (auto& x : w.values()) x = rng.uniform(-1, 1);
  return g.dense(g.flatten(v), g.input(w), g.input(Tensor<double>({1})));
}

}  // namespace detail

// Central-difference checks of every layer, both losses and the assembled
// tiny model, all in double precision.
inline std::vector<NamedReport> run_all(std::uint64_t seed = 1, double tol = 1e-4) {
  using detail::project;
  using detail::random_tensor;
  nn::GradCheckOptions opt;
  opt.tol = tol;
  opt.seed = seed;
  Rng rng(seed);
  std::vector<NamedReport> out;
  auto run = [&](std::string name, ParamSet<double>& ps, const nn::LossBuilder& fn, double eps = 1e-4) {
    auto o = opt;
    o.eps = eps;
    NamedReport r{std::move(name), nn::grad_check(ps, fn, o), {}};
    for (const auto& e : ps.entries())
      if (std::all_of(e.grad.values().begin(), e.grad.values().end(), [](double g) { return g == 0.0; }))
        r.dead.push_back(e.name);
    out.push_back(std::move(r));
  };
  // Two-channel ReLU stacks are often dead at initialization; positive
  // biases move the check to a point where every unit carries gradient.
  auto wake = [&](ParamSet<double>& ps) {
    for (auto& e : ps.entries())
      if (e.name.size() > 2 && e.name.compare(e.name.size() - 2, 2, ".b") == 0)
        for (auto& v : e.value.values()) v = rng.uniform(0.05, 0.2);
  };

  {
    ParamSet<double> ps;
    ps.add("x", random_tensor({5}, rng));
    ps.add("w", random_tensor({5, 3}, rng));
    ps.add("b", random_tensor({3}, rng));
    run("dense", ps, [](Graph<double>& g, ParamSet<double>& p) {
      return project(g, g.dense(g.param(p, "x"), g.param(p, "w"), g.param(p, "b")), 1);
    });
  }
  const nn::ConvSpec specs[] = {{{1, 1, 1}, {1, 1, 1}, false}, {{1, 2, 2}, {1, 1, 1}, true}, {{2, 1, 1}, {0, 1, 1}, true}};
  const char* spec_names[] = {"conv3d", "conv3d_strided_relu", "conv3d_temporal_stride"};
  for (int i = 0; i < 3; ++i) {
    ParamSet<double> ps;
    ps.add("x", random_tensor({3, 6, 5, 2}, rng));
    ps.add("w", random_tensor({3, 3, 3, 2, 3}, rng));
    ps.add("b", random_tensor({3}, rng, -0.1, 0.1));
    const auto spec = specs[i];
    run(spec_names[i], ps, [spec](Graph<double>& g, ParamSet<double>& p) {
      return project(g, g.conv3d(g.param(p, "x"), g.param(p, "w"), g.param(p, "b"), spec), 2);
    });
  }
  {
    ParamSet<double> ps;
    ps.add("x", random_tensor({2, 4}, rng));
    run("conv2d", ps, [](Graph<double>& g, ParamSet<double>& p) {
      // A depth-1 input with a 1-deep kernel is the 2D case.
      Tensor<double> w({1, 3, 3, 1, 2});
      Rng r(4);
      for (auto& v : w.values()) v = r.uniform(-1, 1);
      auto x = g.reshape(g.param(p, "x"), {1, 2, 4, 1});
      return project(g, g.conv3d(x, g.input(w), g.input(Tensor<double>({2})), {{1, 1, 1}, {0, 1, 1}, false}), 3);
    });
  }
  {
    ParamSet<double> ps;
    ps.add("a", random_tensor({6}, rng));
    run("l2_normalize", ps, [](Graph<double>& g, ParamSet<double>& p) { return project(g, g.l2_normalize(g.param(p, "a")), 5); });
  }
  {
    ParamSet<double> ps;
    ps.add("a", random_tensor({16}, rng, -0.5, 1));
    run("relu_dropout", ps, [](Graph<double>& g, ParamSet<double>& p) {
      return project(g, g.dropout(g.relu(g.param(p, "a")), 0.5), 6);
    });
  }
  {
    ParamSet<double> ps;
    ps.add("a", random_tensor({3}, rng));
    ps.add("b", random_tensor({2}, rng));
    run("concat_softmax", ps, [](Graph<double>& g, ParamSet<double>& p) {
      return project(g, g.softmax(g.scale(g.concat({g.param(p, "a"), g.param(p, "b")}), 2.0)), 7);
    });
  }
  for (int c : {0, 1}) {
    ParamSet<double> ps;
    ps.add("z", random_tensor({2}, rng));
    run("laeo_loss_c" + std::to_string(c), ps,
        [c](Graph<double>& g, ParamSet<double>& p) { return g.laeo_loss(g.softmax(g.param(p, "z")), c); });
  }
  {
    ParamSet<double> ps;
    ps.add("pose", Tensor<double>({3}, std::vector<double>{0.3, -0.2, 0.7}));
    run("head_pose_loss", ps, [](Graph<double>& g, ParamSet<double>& p) {
      return g.head_pose_loss(g.param(p, "pose"), HeadPose{-50, 40, 120}, nn::PoseLossWeights{}, 1.0);
    });
  }
  {
    ParamSet<double> ps;
    ps.add("pose", Tensor<double>({3}, std::vector<double>{-0.9, 0.1, -0.05}));
    run("head_pose_loss_outer", ps, [](Graph<double>& g, ParamSet<double>& p) {
      return g.head_pose_loss(g.param(p, "pose"), HeadPose{170, -80, 179}, nn::PoseLossWeights{}, 2.0);
    });
  }

  const auto cfg = tiny_config();
  Rng in(derive_seed(seed, 99));
  const auto left = random_tensor({2, 64, 64, 3}, in, 0, 1);
  const auto right = random_tensor({2, 64, 64, 3}, in, 0, 1);
  const auto map = random_tensor({2, 64, 64, 3}, in, 0, 1);
  {
    auto ps = model::build_laeonet<double>(cfg, seed);
    wake(ps);
    run("laeonet_tiny", ps, [&](Graph<double>& g, ParamSet<double>& p) {
      return g.laeo_loss(model::forward(g, p, cfg, left, right, map), 1);
    }, 1e-5);
  }
  {
    auto ps = model::build_pose_model<double>(cfg, seed);
    wake(ps);
    run("pose_model_tiny", ps, [&](Graph<double>& g, ParamSet<double>& p) {
      return g.head_pose_loss(model::pose_forward(g, p, cfg, left), HeadPose{35, -10, 5}, nn::PoseLossWeights{}, 1.0);
    }, 1e-5);
  }
  return out;
}

}  // namespace laeo::selfcheck
