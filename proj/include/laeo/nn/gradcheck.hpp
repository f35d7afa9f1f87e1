#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "laeo/nn/graph.hpp"

namespace laeo::nn {

struct GradCheckOptions {
  double eps = 1e-4;
  double tol = 1e-4;
  // Entries sampled per parameter tensor (all entries when the tensor is smaller).
  std::size_t samples_per_param = 24;
  // Gradients with magnitude below this are compared absolutely.
  double abs_floor = 1e-6;
  Mode mode = Mode::Training;
  std::uint64_t seed = 1;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  double tol = 0.0;
  bool passed() const { return max_rel_error <= tol; }
};

// Builds the scalar loss of a forward pass over `params` inside `g`.
using LossBuilder = std::function<Graph<double>::Var(Graph<double>& g, ParamSet<double>& params)>;

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Compares reverse-mode gradients with central differences. Every forward
// pass (analytic and perturbed) uses the same graph seed, so stochastic
// layers see identical masks.
inline GradCheckReport grad_check(ParamSet<double>& params, const LossBuilder& build,
                                  const GradCheckOptions& opt = {}) {
  params.zero_grad();
  {
    Graph<double> g(opt.mode, opt.seed);
    auto loss = build(g, params);
    g.backward(loss);
  }
  auto eval = [&]() {
    Graph<double> g(opt.mode, opt.seed, /*grad_enabled=*/false);
    return g.value(build(g, params))[0];
  };

  GradCheckReport report;
  report.tol = opt.tol;
  Rng rng(opt.seed ^ 0x5EEDULL);
  for (auto& e : params.entries()) {
    GradCheckEntry entry{e.name, 0, 0.0};
    std::vector<std::size_t> idx(e.value.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (idx.size() > opt.samples_per_param) {
      rng.shuffle(idx);
      idx.resize(opt.samples_per_param);
    }
    for (std::size_t i : idx) {
      const double orig = e.value[i];
      e.value[i] = orig + opt.eps;
      const double up = eval();
      e.value[i] = orig - opt.eps;
      const double down = eval();
      e.value[i] = orig;
      const double numeric = (up - down) / (2 * opt.eps);
      const double err = relative_error(e.grad[i], numeric, opt.abs_floor);
      entry.max_rel_error = std::max(entry.max_rel_error, err);
      ++entry.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace laeo::nn
