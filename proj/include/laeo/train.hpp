#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "laeo/eval.hpp"
#include "laeo/image.hpp"
#include "laeo/model.hpp"
#include "laeo/nn/losses.hpp"
#include "laeo/nn/optim.hpp"
#include "laeo/synth.hpp"

namespace laeo::train {

using model::ModelConfig;
using nn::ParamSet;
using nn::Tensor;
using synth::PairRecord;

struct AugmentConfig {
  bool enabled = true;
  double shift_px = 4.0;
  double zoom = 0.08;
  double brightness = 0.1;
  double flip = 0.5;  // probability of mirroring the whole pair
};

struct TrainConfig {
  int epochs = 10;
  int batch_size = 8;
  double lr = 0.01;
  double momentum = 0.9;
  double lr_decay = 0.85;  // per epoch
  int synth_only_epochs = 2;
  int curriculum_period = 2;
  double difficulty_step = 0.25;
  double hardest_keep = 0.25;  // fraction of negatives kept at difficulty 1
  AugmentConfig augment;
  std::uint64_t seed = 7;

  void validate() const {
    require(epochs >= 1, "epochs must be >= 1");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(lr > 0, "lr must be > 0");
    require(momentum >= 0 && momentum < 1, "momentum must be in [0, 1)");
    require(lr_decay > 0 && lr_decay <= 1, "lr_decay must be in (0, 1]");
    require(synth_only_epochs >= 0, "synth_only_epochs must be >= 0");
    require(curriculum_period >= 1, "curriculum_period must be >= 1");
    require(difficulty_step >= 0 && difficulty_step <= 1, "difficulty_step must be in [0, 1]");
    require(hardest_keep > 0 && hardest_keep <= 1, "hardest_keep must be in (0, 1]");
  }
};

// Curriculum difficulty for a 1-based epoch: steps up every `period` epochs.
inline double difficulty(int epoch, const TrainConfig& c) {
  return std::min(1.0, c.difficulty_step * double((epoch - 1) / c.curriculum_period));
}

// Keep-fraction of the highest-scoring negatives at difficulty d: all of them
// at d = 0, `hardest_keep` at d = 1.
inline double keep_fraction(double d, const TrainConfig& c) { return 1.0 - d * (1.0 - c.hardest_keep); }

struct NegativeSelection {
  std::vector<std::size_t> indices;  // into the scored negatives
  bool fallback = false;             // kept pool was empty; sampled uniformly
};

// Negatives whose score is at least the (1 - keep)-quantile, then `count`
// draws from them (all of them, shuffled, when d = 0).
inline NegativeSelection select_negatives(const std::vector<double>& scores, double d, std::size_t count,
                                          const TrainConfig& c, Rng& rng) {
  NegativeSelection sel;
  const std::size_t n = scores.size();
  if (n == 0 || count == 0) {
    sel.fallback = n == 0 && count > 0;
    return sel;
  }
  std::vector<std::size_t> pool;
  if (d <= 0.0) {
    for (std::size_t i = 0; i < n; ++i) pool.push_back(i);
  } else {
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t keep = std::max<std::size_t>(1, std::size_t(std::ceil(keep_fraction(d, c) * double(n))));
    const double threshold = sorted[n - keep];
    for (std::size_t i = 0; i < n; ++i)
      if (scores[i] >= threshold) pool.push_back(i);
  }
  if (pool.empty()) {
    sel.fallback = true;
    for (std::size_t i = 0; i < n; ++i) pool.push_back(i);
  }
  if (pool.size() == n) {
    rng.shuffle(pool);
    sel.indices.assign(pool.begin(), pool.begin() + std::ptrdiff_t(std::min(count, n)));
  } else {
    for (std::size_t k = 0; k < count; ++k) sel.indices.push_back(pool[rng.index(pool.size())]);
  }
  return sel;
}

namespace detail {

inline void warp_stack(Tensor<float>& t, double sx, double sy, double zoom, image::Border border) {
  const std::size_t side = t.dim(1), ch = t.dim(3), frame = side * side * ch;
  std::vector<float> tmp(frame);
  for (std::size_t f = 0; f < t.dim(0); ++f) {
    float* p = t.data() + f * frame;
    image::warp(p, tmp.data(), side, ch, sx, sy, zoom, border);
    std::copy(tmp.begin(), tmp.end(), p);
  }
}

inline void flip_stack(Tensor<float>& t) {
  for (std::size_t f = 0; f < t.dim(0); ++f)
    synth::flip_horizontal(t.data() + f * t.dim(1) * t.dim(2) * t.dim(3), t.dim(1), t.dim(3));
}

}  // namespace detail

// Random shift/zoom shared by crops and map, brightness on crops only, and
// an optional mirror of the whole pair (which swaps roles).
inline void augment(synth::TrackPairSample& s, const AugmentConfig& a, Rng& rng) {
  if (!a.enabled) return;
  if (rng.bernoulli(a.flip)) {
    detail::flip_stack(s.crops_left);
    detail::flip_stack(s.crops_right);
    std::swap(s.crops_left, s.crops_right);
    detail::flip_stack(s.headmap);
    for (std::size_t i = 0; i < s.headmap.size(); i += 3)
      std::swap(s.headmap[i + headmap::kLeft], s.headmap[i + headmap::kRight]);
  }
  const double sx = rng.uniform(-a.shift_px, a.shift_px), sy = rng.uniform(-a.shift_px, a.shift_px);
  const double zoom = 1.0 + rng.uniform(-a.zoom, a.zoom);
  const float bright = float(rng.uniform(-a.brightness, a.brightness));
  for (auto* t : {&s.crops_left, &s.crops_right}) {
    detail::warp_stack(*t, sx, sy, zoom, image::Border::Clamp);
    for (auto& v : t->values()) v = std::clamp(v + bright, 0.0f, 1.0f);
  }
  detail::warp_stack(s.headmap, sx, sy, zoom, image::Border::Zero);
}

struct EpochRecord {
  int epoch = 0;
  std::string source;  // "synthetic" or "real"
  double difficulty = 0;
  double lr = 0;
  std::size_t samples = 0;
  double loss = 0;
  double val_ap = std::numeric_limits<double>::quiet_NaN();
  bool fallback = false;
};

struct TrainResult {
  ParamSet<float> params;
  std::vector<EpochRecord> history;
};

using Logger = std::function<void(const std::string&)>;

inline std::vector<double> score_records(ParamSet<float>& ps, const ModelConfig& cfg,
                                         const std::vector<const PairRecord*>& recs, const synth::SynthConfig& sc) {
  std::vector<double> out;
  out.reserve(recs.size());
  for (const auto* r : recs) out.push_back(model::score_pair(ps, cfg, synth::materialize(*r, cfg.T, cfg.M, sc)));
  return out;
}

inline double validation_ap(ParamSet<float>& ps, const ModelConfig& cfg, const std::vector<const PairRecord*>& val,
                            const synth::SynthConfig& sc) {
  std::vector<bool> labels;
  for (const auto* r : val) labels.push_back(r->label == 1);
  return eval::average_precision(score_records(ps, cfg, val, sc), labels).ap;
}

// Epochs 1..synth_only_epochs use synthetic pairs; afterwards real and
// synthetic epochs alternate (real first). Without real data every epoch is
// synthetic. Each epoch visits every positive once and as many negatives,
// drawn according to the curriculum.
inline TrainResult train(ParamSet<float> params, const ModelConfig& cfg, const std::vector<const PairRecord*>& real,
                         const std::vector<const PairRecord*>& synthetic, const std::vector<const PairRecord*>& val,
                         const synth::SynthConfig& sc, const TrainConfig& tc, const Logger& log = {}) {
  cfg.validate();
  tc.validate();
  require(!synthetic.empty() || !real.empty(), "no training data");
  TrainResult res;
  nn::Sgd<float> opt(tc.lr, tc.momentum);
  Rng rng(derive_seed(tc.seed, 0x7EA1));
  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    const bool use_real = !real.empty() && (synthetic.empty() || (epoch > tc.synth_only_epochs &&
                                                                  (epoch - tc.synth_only_epochs) % 2 == 1));
    const auto& src = use_real ? real : synthetic;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.source = use_real ? "real" : "synthetic";
    rec.difficulty = difficulty(epoch, tc);
    rec.lr = opt.lr();

    std::vector<const PairRecord*> pos, neg;
    for (const auto* r : src) (r->label == 1 ? pos : neg).push_back(r);
    std::vector<double> neg_scores(neg.size(), 0.0);
    if (rec.difficulty > 0 && !neg.empty()) neg_scores = score_records(params, cfg, neg, sc);
    const std::size_t want_neg = neg.empty() ? pos.size() : neg.size();
    const auto sel = select_negatives(neg_scores, rec.difficulty, want_neg, tc, rng);
    rec.fallback = sel.fallback;
    if (sel.fallback && log) log("epoch " + std::to_string(epoch) + ": no negatives at this difficulty; uniform sampling");

    std::vector<const PairRecord*> order = pos;
    for (std::size_t i : sel.indices) order.push_back(neg[i]);
    rng.shuffle(order);

    double loss_sum = 0;
    params.zero_grad();
    for (std::size_t b = 0; b < order.size(); b += std::size_t(tc.batch_size)) {
      const std::size_t e = std::min(order.size(), b + std::size_t(tc.batch_size));
      const float inv = 1.0f / float(e - b);
      for (std::size_t k = b; k < e; ++k) {
        auto s = synth::materialize(*order[k], cfg.T, cfg.M, sc);
        Rng arng(derive_seed(tc.seed, step * 2 + 1));
        augment(s, tc.augment, arng);
        nn::Graph<float> g(nn::Mode::Training, derive_seed(tc.seed, step * 2));
        auto probs = model::forward(g, params, cfg, s.crops_left, s.crops_right, s.headmap);
        auto loss = g.laeo_loss(probs, s.label);
        loss_sum += double(g.value(loss)[0]);
        g.backward(loss, inv);
        ++step;
      }
      opt.step(params);
      params.zero_grad();
    }
    rec.samples = order.size();
    rec.loss = order.empty() ? 0.0 : loss_sum / double(order.size());
    if (!val.empty()) rec.val_ap = validation_ap(params, cfg, val, sc);
    opt.set_lr(opt.lr() * tc.lr_decay);
    if (log) {
      char buf[200];
      std::snprintf(buf, sizeof buf, "epoch %d source=%s difficulty=%.2f samples=%zu loss=%.4f val_ap=%.4f",
                    epoch, rec.source.c_str(), rec.difficulty, rec.samples, rec.loss, rec.val_ap);
      log(buf);
    }
    res.history.push_back(rec);
  }
  res.params = std::move(params);
  return res;
}

inline std::string history_csv(const std::vector<EpochRecord>& h) {
  std::string out = "#format=laeo-history,version=1\nepoch,source,difficulty,lr,samples,loss,val_ap,fallback\n";
  char buf[256];
  for (const auto& r : h) {
    std::snprintf(buf, sizeof buf, "%d,%s,%.6f,%.6g,%zu,%.6f,%.6f,%d\n", r.epoch, r.source.c_str(), r.difficulty,
                  r.lr, r.samples, r.loss, r.val_ap, int(r.fallback));
    out += buf;
  }
  return out;
}

// ---- head-pose pre-training ------------------------------------------------

struct PretrainConfig {
  int epochs = 6;
  int batch_size = 8;
  double lr = 0.02;
  double momentum = 0.9;
  double lr_decay = 0.8;
  nn::PoseLossWeights weights;
  double sign_k = 1.0;
  std::uint64_t seed = 3;

  void validate() const {
    require(epochs >= 1 && batch_size >= 1 && lr > 0, "invalid pre-training schedule");
    require(momentum >= 0 && momentum < 1, "momentum must be in [0, 1)");
    require(sign_k > 0, "sign_k must be > 0");
    weights.validate();
  }
};

struct PretrainResult {
  ParamSet<float> params;
  std::vector<double> epoch_loss;
};

inline PretrainResult pretrain_headpose(ParamSet<float> params, const ModelConfig& cfg,
                                        const std::vector<synth::PoseSample>& data, const PretrainConfig& pc,
                                        const Logger& log = {}) {
  cfg.validate();
  pc.validate();
  require(!data.empty(), "no pose samples");
  PretrainResult res;
  nn::Sgd<float> opt(pc.lr, pc.momentum);
  Rng rng(pc.seed);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= pc.epochs; ++epoch) {
    rng.shuffle(order);
    double sum = 0;
    params.zero_grad();
    for (std::size_t b = 0; b < order.size(); b += std::size_t(pc.batch_size)) {
      const std::size_t e = std::min(order.size(), b + std::size_t(pc.batch_size));
      for (std::size_t k = b; k < e; ++k) {
        const auto& s = data[order[k]];
        nn::Graph<float> g(nn::Mode::Training, derive_seed(pc.seed, step++));
        auto loss = g.head_pose_loss(model::pose_forward(g, params, cfg, s.crops), s.pose, pc.weights, pc.sign_k);
        sum += double(g.value(loss)[0]);
        g.backward(loss, 1.0f / float(e - b));
      }
      opt.step(params);
      params.zero_grad();
    }
    res.epoch_loss.push_back(sum / double(data.size()));
    opt.set_lr(opt.lr() * pc.lr_decay);
    if (log) log("pretrain epoch " + std::to_string(epoch) + " loss=" + std::to_string(res.epoch_loss.back()));
  }
  res.params = std::move(params);
  return res;
}

// Fraction of samples (with non-zero yaw) whose predicted yaw sign is right.
inline double yaw_sign_accuracy(ParamSet<float>& ps, const ModelConfig& cfg, const std::vector<synth::PoseSample>& data) {
  std::size_t ok = 0, n = 0;
  for (const auto& s : data) {
    if (s.pose.yaw == 0.0) continue;
    ++n;
    ok += (model::predict_pose(ps, cfg, s.crops).yaw > 0) == (s.pose.yaw > 0);
  }
  require(n > 0, "no samples with non-zero yaw");
  return double(ok) / double(n);
}

// One row per sample: ground-truth angles then the embedding.
inline std::string embeddings_csv(ParamSet<float>& ps, const ModelConfig& cfg, const std::vector<synth::PoseSample>& data) {
  std::string out = "#format=laeo-embeddings,version=1\nsample,yaw,pitch,roll,embedding\n";
  char buf[64];
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f,", i, data[i].pose.yaw, data[i].pose.pitch, data[i].pose.roll);
    out += buf;
    const auto e = model::embed_head(ps, cfg, data[i].crops);
    for (std::size_t k = 0; k < e.size(); ++k) {
      std::snprintf(buf, sizeof buf, k ? " %.6f" : "%.6f", double(e[k]));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace laeo::train
