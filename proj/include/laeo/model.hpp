#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "laeo/nn/graph.hpp"
#include "laeo/nn/params.hpp"
#include "laeo/rng.hpp"
#include "laeo/synth.hpp"

namespace laeo::model {

using nn::Graph;
using nn::ParamSet;
using nn::Tensor;

struct ModelConfig {
  int T = 10;  // head-track length
  int M = 10;  // head-map length
  std::vector<int> head_channels{8, 12, 16, 16, 24};
  std::vector<int> head_strides{2, 2, 2, 1, 2};
  std::vector<int> map_channels{4, 8, 8, 16};
  std::vector<int> map_strides{2, 2, 2, 2};
  int fusion_units = 32;
  double head_dropout = 0.5;
  double fusion_dropout = 0.5;
  double l2_eps = 1e-6;

  void validate() const {
    require(T >= 1 && M >= 1, "T and M must be >= 1");
    require(head_channels.size() == 5 && head_strides.size() == 5, "head branch has five conv layers");
    require(map_channels.size() == 4 && map_strides.size() == 4, "head-map branch has four conv layers");
    for (int c : head_channels) require(c >= 1, "channel counts must be >= 1");
    for (int c : map_channels) require(c >= 1, "channel counts must be >= 1");
    for (int s : head_strides) require(s == 1 || s == 2, "strides must be 1 or 2");
    for (int s : map_strides) require(s == 1 || s == 2, "strides must be 1 or 2");
    require(fusion_units >= 1, "fusion_units must be >= 1");
    require(head_dropout >= 0 && head_dropout < 1 && fusion_dropout >= 0 && fusion_dropout < 1,
            "dropout rates must be in [0, 1)");
    require(l2_eps >= 0, "l2_eps must be >= 0");
  }
};

inline constexpr std::size_t kSide = synth::kCropSide;

// Temporal kernel depth: 3 over sequences, 1 for single frames.
inline std::size_t temporal_kernel(int frames) { return frames >= 2 ? 3 : 1; }

struct BranchShape {
  std::size_t depth, side, channels;
  std::size_t size() const { return depth * side * side * channels; }
};

inline BranchShape branch_output(int frames, const std::vector<int>& strides, const std::vector<int>& channels) {
  std::size_t side = kSide;
  for (int s : strides) side = nn::conv_out_dim(side, 3, s, 1);
  return {std::size_t(frames), side, std::size_t(channels.back())};
}

inline std::size_t conv_params(std::size_t kd, std::size_t cin, std::size_t cout) { return kd * 9 * cin * cout + cout; }

// Closed-form parameter count of the full network.
inline std::size_t param_count(const ModelConfig& c) {
  std::size_t n = 0, cin = 3;
  for (int co : c.head_channels) n += conv_params(temporal_kernel(c.T), cin, std::size_t(co)), cin = std::size_t(co);
  cin = 3;
  for (int co : c.map_channels) n += conv_params(temporal_kernel(c.M), cin, std::size_t(co)), cin = std::size_t(co);
  const std::size_t emb = 2 * branch_output(c.T, c.head_strides, c.head_channels).size() +
                          branch_output(c.M, c.map_strides, c.map_channels).size();
  n += emb * std::size_t(c.fusion_units) + std::size_t(c.fusion_units);
  n += std::size_t(c.fusion_units) * 2 + 2;
  return n;
}

inline std::string conv_name(const char* branch, std::size_t i, const char* what) {
  return std::string(branch) + ".conv" + std::to_string(i + 1) + "." + what;
}

namespace detail {

template <class S>
void add_normal(ParamSet<S>& ps, const std::string& name, nn::Shape shape, double stddev, Rng& rng) {
  Tensor<S> t(std::move(shape));
  for (auto& v : t.values()) v = S(stddev * rng.normal());
  ps.add(name, std::move(t));
}

template <class S>
void add_conv_stack(ParamSet<S>& ps, const char* branch, int frames, const std::vector<int>& channels, Rng& rng) {
  const std::size_t kd = temporal_kernel(frames);
  std::size_t cin = 3;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const std::size_t co = std::size_t(channels[i]);
    add_normal(ps, conv_name(branch, i, "w"), {kd, 3, 3, cin, co}, std::sqrt(2.0 / double(kd * 9 * cin)), rng);
    ps.add(conv_name(branch, i, "b"), Tensor<S>({co}));
    cin = co;
  }
}

}  // namespace detail

enum class Init { Random, PosePretrained };

// He-normal initialization. Concatenated embeddings are unit vectors, so the
// fusion layer is scaled to the number of embeddings rather than their width.
template <class S = float>
ParamSet<S> build_laeonet(const ModelConfig& cfg, std::uint64_t seed, Init init = Init::Random,
                          const ParamSet<float>* pretrained = nullptr) {
  cfg.validate();
  Rng rng(seed);
  ParamSet<S> ps;
  detail::add_conv_stack(ps, "head", cfg.T, cfg.head_channels, rng);
  detail::add_conv_stack(ps, "map", cfg.M, cfg.map_channels, rng);
  const std::size_t emb = 2 * branch_output(cfg.T, cfg.head_strides, cfg.head_channels).size() +
                          branch_output(cfg.M, cfg.map_strides, cfg.map_channels).size();
  const std::size_t fu = std::size_t(cfg.fusion_units);
  detail::add_normal(ps, "fusion.fc.w", {emb, fu}, std::sqrt(2.0 / 3.0), rng);
  ps.add("fusion.fc.b", Tensor<S>({fu}));
  detail::add_normal(ps, "fusion.out.w", {fu, 2}, std::sqrt(1.0 / double(fu)), rng);
  ps.add("fusion.out.b", Tensor<S>({2}));
  if (init == Init::PosePretrained) {
    require(pretrained != nullptr, "pose-pretrained init needs pretrained parameters");
    for (std::size_t i = 0; i < cfg.head_channels.size(); ++i)
      for (const char* what : {"w", "b"}) {
        const auto name = conv_name("head", i, what);
        require(pretrained->contains(name), "pretrained parameters lack '" + name + "'");
        const auto& src = pretrained->value(name);
        require(src.shape() == ps.value(name).shape(),
                "pretrained '" + name + "' has shape " + nn::shape_str(src.shape()) + ", model expects " +
                    nn::shape_str(ps.value(name).shape()));
        ps.value(name) = src.template cast<S>();
      }
  }
  return ps;
}

template <class S>
typename Graph<S>::Var conv_stack(Graph<S>& g, ParamSet<S>& ps, typename Graph<S>::Var x, const char* branch,
                                  int frames, const std::vector<int>& strides) {
  const int tp = temporal_kernel(frames) == 3 ? 1 : 0;
  for (std::size_t i = 0; i < strides.size(); ++i) {
    nn::ConvSpec spec{{1, strides[i], strides[i]}, {tp, 1, 1}, true};
    x = g.conv3d(x, g.param(ps, conv_name(branch, i, "w")), g.param(ps, conv_name(branch, i, "b")), spec);
  }
  return x;
}

// Head-track branch: [T,64,64,3] -> unit-norm embedding.
template <class S>
typename Graph<S>::Var head_embedding(Graph<S>& g, ParamSet<S>& ps, const ModelConfig& cfg, const Tensor<S>& crops) {
  require(crops.shape() == nn::Shape({std::size_t(cfg.T), kSide, kSide, 3}),
          "head track must be [" + std::to_string(cfg.T) + ",64,64,3], got " + nn::shape_str(crops.shape()));
  auto x = conv_stack(g, ps, g.input(crops), "head", cfg.T, cfg.head_strides);
  x = g.dropout(g.flatten(x), cfg.head_dropout);
  return g.l2_normalize(x, cfg.l2_eps);
}

template <class S>
typename Graph<S>::Var map_embedding(Graph<S>& g, ParamSet<S>& ps, const ModelConfig& cfg, const Tensor<S>& map) {
  require(map.shape() == nn::Shape({std::size_t(cfg.M), kSide, kSide, 3}),
          "head map must be [" + std::to_string(cfg.M) + ",64,64,3], got " + nn::shape_str(map.shape()));
  auto x = conv_stack(g, ps, g.input(map), "map", cfg.M, cfg.map_strides);
  return g.l2_normalize(g.flatten(x), cfg.l2_eps);
}

// Two-way softmax; index 1 is P(LAEO). Both head tracks share weights.
template <class S>
typename Graph<S>::Var forward(Graph<S>& g, ParamSet<S>& ps, const ModelConfig& cfg, const Tensor<S>& left,
                               const Tensor<S>& right, const Tensor<S>& map) {
  auto el = head_embedding(g, ps, cfg, left);
  auto er = head_embedding(g, ps, cfg, right);
  auto em = map_embedding(g, ps, cfg, map);
  auto h = g.dense(g.concat({el, er, em}), g.param(ps, "fusion.fc.w"), g.param(ps, "fusion.fc.b"));
  h = g.dropout(g.relu(h), cfg.fusion_dropout);
  auto logits = g.dense(h, g.param(ps, "fusion.out.w"), g.param(ps, "fusion.out.b"));
  return g.softmax(logits);
}

// P(LAEO) for one pair, inference mode.
inline double score_pair(ParamSet<float>& ps, const ModelConfig& cfg, const synth::TrackPairSample& s) {
  Graph<float> g(nn::Mode::Inference, 0, false);
  auto p = forward(g, ps, cfg, s.crops_left, s.crops_right, s.headmap);
  return double(g.value(p)[1]);
}

// ---- head-pose regression head ---------------------------------------------

template <class S = float>
ParamSet<S> build_pose_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ParamSet<S> ps;
  detail::add_conv_stack(ps, "head", cfg.T, cfg.head_channels, rng);
  const std::size_t emb = branch_output(cfg.T, cfg.head_strides, cfg.head_channels).size();
  detail::add_normal(ps, "pose.out.w", {emb, 3}, 1.0, rng);
  ps.add("pose.out.b", Tensor<S>({3}));
  return ps;
}

// Normalized (yaw/180, pitch/90, roll/180) prediction.
template <class S>
typename Graph<S>::Var pose_forward(Graph<S>& g, ParamSet<S>& ps, const ModelConfig& cfg, const Tensor<S>& crops) {
  auto e = head_embedding(g, ps, cfg, crops);
  return g.dense(e, g.param(ps, "pose.out.w"), g.param(ps, "pose.out.b"));
}

inline HeadPose predict_pose(ParamSet<float>& ps, const ModelConfig& cfg, const Tensor<float>& crops) {
  Graph<float> g(nn::Mode::Inference, 0, false);
  const auto& v = g.value(pose_forward(g, ps, cfg, crops));
  return {double(v[0]) * nn::kYawScale, double(v[1]) * nn::kPitchScale, double(v[2]) * nn::kRollScale};
}

inline std::vector<float> embed_head(ParamSet<float>& ps, const ModelConfig& cfg, const Tensor<float>& crops) {
  Graph<float> g(nn::Mode::Inference, 0, false);
  const auto& v = g.value(head_embedding(g, ps, cfg, crops));
  return {v.values().begin(), v.values().end()};
}

}  // namespace laeo::model
