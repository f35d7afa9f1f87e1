#pragma once

#include <charconv>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "laeo/eval.hpp"
#include "laeo/headmap.hpp"
#include "laeo/model.hpp"
#include "laeo/nn/checkpoint.hpp"
#include "laeo/synth.hpp"
#include "laeo/tracker.hpp"
#include "laeo/train.hpp"

namespace laeo {

// Everything a run can be configured with. Flat `key = value` files map onto
// it through run_config_keys().
struct RunConfig {
  std::uint64_t seed = 7;
  tracker::LinkerConfig linker;
  headmap::HeadMapConfig headmap;
  model::ModelConfig model;
  train::TrainConfig train;
  train::PretrainConfig pretrain;
  int pretrain_samples = 1000;
  synth::SynthConfig synth;
  eval::Protocol protocol = eval::Protocol::FrameIou;
  int window_stride = 1;

  // Sub-configs that carry their own copy of a shared setting.
  void sync() {
    headmap.M = model.M;
    train.seed = seed;
    pretrain.seed = seed;
  }

  void validate() const {
    linker.validate();
    headmap.validate();
    model.validate();
    train.validate();
    pretrain.validate();
    require(pretrain_samples >= 1, "pretrain.samples must be >= 1");
    require(window_stride >= 1, "eval.window_stride must be >= 1");
    require(synth.scene_frames >= model.T && synth.scene_frames >= model.M,
            "synth.scene_frames must be >= model.T and model.M");
    require(synth.oracle.tau_deg > 0 && synth.oracle.tau_deg < 90, "oracle.tau_deg must be in (0, 90)");
  }
};

struct ConfigKey {
  std::string name;
  std::string type;
  std::string help;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& s) {
  T v{};
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw ValidationError("'" + s + "' is not a valid number");
  return v;
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ValidationError("'" + s + "' is not a boolean (true/false)");
}

inline std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(item));
  if (out.empty()) throw ValidationError("empty integer list");
  return out;
}

inline std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

inline ConfigKey key(std::string name, double& v, std::string help) {
  return {std::move(name), "float", std::move(help), [&v] { return fmt(v); },
          [&v](const std::string& s) { v = parse_number<double>(s); }};
}
inline ConfigKey key(std::string name, int& v, std::string help) {
  return {std::move(name), "int", std::move(help), [&v] { return std::to_string(v); },
          [&v](const std::string& s) { v = parse_number<int>(s); }};
}
inline ConfigKey key(std::string name, std::uint64_t& v, std::string help) {
  return {std::move(name), "uint", std::move(help), [&v] { return std::to_string(v); },
          [&v](const std::string& s) { v = parse_number<std::uint64_t>(s); }};
}
inline ConfigKey key(std::string name, bool& v, std::string help) {
  return {std::move(name), "bool", std::move(help), [&v] { return std::string(v ? "true" : "false"); },
          [&v](const std::string& s) { v = parse_bool(s); }};
}
inline ConfigKey key(std::string name, std::vector<int>& v, std::string help) {
  return {std::move(name), "int list", std::move(help), [&v] { return join(v); },
          [&v](const std::string& s) { v = parse_ints(s); }};
}

}  // namespace detail

// Every configurable key, bound to the fields of `c`.
inline std::vector<ConfigKey> run_config_keys(RunConfig& c) {
  using detail::key;
  auto& m = c.model;
  auto& t = c.train;
  auto& p = c.pretrain;
  auto& s = c.synth;
  std::vector<ConfigKey> k = {
      key("seed", c.seed, "seed for every random choice (--seed overrides)"),
      key("linker.iou_link_threshold", c.linker.iou_link_threshold, "minimum IoU to extend a track"),
      key("linker.max_missed_frames", c.linker.max_missed_frames, "frames a track may go unmatched"),
      key("linker.min_track_length", c.linker.min_track_length, "shorter tracks are dropped"),
      key("headmap.sigma_ratio", c.headmap.sigma_ratio, "blob sigma as a fraction of half the box size"),
      key("headmap.cutoff", c.headmap.cutoff, "blob radius in sigmas"),
      key("model.T", m.T, "head-track length"),
      key("model.M", m.M, "head-map length"),
      key("model.head_channels", m.head_channels, "channels of the five head-branch convs"),
      key("model.head_strides", m.head_strides, "spatial strides of the head-branch convs"),
      key("model.map_channels", m.map_channels, "channels of the four head-map convs"),
      key("model.map_strides", m.map_strides, "spatial strides of the head-map convs"),
      key("model.fusion_units", m.fusion_units, "width of the fusion dense layer"),
      key("model.head_dropout", m.head_dropout, "dropout on head embeddings"),
      key("model.fusion_dropout", m.fusion_dropout, "dropout after the fusion layer"),
      key("train.epochs", t.epochs, "training epochs"),
      key("train.batch_size", t.batch_size, "samples per SGD step"),
      key("train.lr", t.lr, "initial learning rate"),
      key("train.momentum", t.momentum, "SGD momentum"),
      key("train.lr_decay", t.lr_decay, "learning-rate factor per epoch"),
      key("train.synth_only_epochs", t.synth_only_epochs, "epochs before real data is used"),
      key("train.curriculum_period", t.curriculum_period, "epochs per difficulty step"),
      key("train.difficulty_step", t.difficulty_step, "difficulty increase per period"),
      key("train.hardest_keep", t.hardest_keep, "fraction of negatives kept at difficulty 1"),
      key("augment.enabled", t.augment.enabled, "apply training augmentation"),
      key("augment.shift_px", t.augment.shift_px, "max shift in pixels"),
      key("augment.zoom", t.augment.zoom, "max relative zoom"),
      key("augment.brightness", t.augment.brightness, "max brightness offset"),
      key("augment.flip", t.augment.flip, "probability of mirroring the whole pair"),
      key("pretrain.epochs", p.epochs, "head-pose epochs"),
      key("pretrain.batch_size", p.batch_size, "samples per SGD step"),
      key("pretrain.lr", p.lr, "initial learning rate"),
      key("pretrain.momentum", p.momentum, "SGD momentum"),
      key("pretrain.lr_decay", p.lr_decay, "learning-rate factor per epoch"),
      key("pretrain.samples", c.pretrain_samples, "synthetic pose samples"),
      key("pretrain.sign_k", p.sign_k, "tanh sharpness of the yaw-sign loss"),
      key("pose_loss.yaw", p.weights.yaw, "yaw weight"),
      key("pose_loss.pitch", p.weights.pitch, "pitch weight"),
      key("pose_loss.roll", p.weights.roll, "roll weight"),
      key("pose_loss.sign", p.weights.sign, "yaw-sign weight"),
      key("oracle.tau_deg", s.oracle.tau_deg, "max gaze deviation for LAEO, degrees"),
      key("synth.scene_frames", s.scene_frames, "frames per synthetic scene"),
      key("synth.box_noise", s.box_noise, "per-frame box jitter, fraction of box height"),
      key("synth.max_others", s.max_others, "max bystanders per scene"),
      key("synth.mirror_fraction", s.mirror_fraction, "fraction of negatives made by mirroring"),
      key("synth.misdirected_fraction", s.misdirected_fraction, "misdirected share of the other negatives"),
      key("synth.positive_cone_fraction", s.positive_cone_fraction, "positive gaze deviation bound, fraction of tau"),
      key("synth.val_fraction", s.val_fraction, "held-out fraction"),
      key("render.noise_sigma", s.render.noise_sigma, "pixel noise of rendered crops"),
      key("jitter.shift_px", s.jitter.shift_px, "max per-frame shift in pixels"),
      key("jitter.zoom", s.jitter.zoom, "max per-frame relative zoom"),
      key("jitter.brightness", s.jitter.brightness, "max per-frame brightness offset"),
      key("jitter.noise_sigma", s.jitter.noise_sigma, "per-frame pixel noise"),
      key("eval.window_stride", c.window_stride, "frame step between scored windows"),
  };
  k.push_back({"eval.protocol", "frame_iou|ava|shot", "evaluation protocol",
               [&c] { return std::string(eval::to_string(c.protocol)); },
               [&c](const std::string& v) { c.protocol = eval::protocol_from_string(v); }});
  return k;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace detail

// Applies one `key=value` assignment; unknown keys are errors.
inline void set_config_key(RunConfig& c, const std::string& name, const std::string& value) {
  for (auto& k : run_config_keys(c))
    if (k.name == name) {
      try {
        k.set(value);
      } catch (const ValidationError& e) {
        throw ValidationError("config key '" + name + "': " + e.what());
      }
      return;
    }
  throw ValidationError("unknown config key '" + name + "'");
}

inline void apply_assignment(RunConfig& c, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos, "expected key=value, got '" + assignment + "'");
  set_config_key(c, detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)));
}

// Reads a flat config file: `key = value` lines, `#` comments.
inline void load_config(RunConfig& c, const std::string& path) {
  std::istringstream in(nn::read_file(path));
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.rfind("# format=", 0) == 0 && detail::trim(line) != "# format=laeo-config,version=1")
      throw ParseError(path, n, "unsupported config format (expected laeo-config version 1)");
    const auto body = detail::trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    try {
      apply_assignment(c, body);
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
}

// Effective configuration in the same format load_config reads.
inline std::string config_text(RunConfig c) {
  std::string out = "# format=laeo-config,version=1\n";
  for (const auto& k : run_config_keys(c)) out += k.name + " = " + k.get() + "\n";
  return out;
}

// Key listing for --help, with defaults.
inline std::string config_help() {
  RunConfig d;
  std::string out = "Config keys (key = default  [type] description):\n";
  for (const auto& k : run_config_keys(d)) {
    std::string left = "  " + k.name + " = " + k.get();
    if (left.size() < 44) left.resize(44, ' ');
    out += left + " [" + k.type + "] " + k.help + "\n";
  }
  return out;
}

}  // namespace laeo
