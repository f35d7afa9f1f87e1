// laeo: command-line front end. Each subcommand reads and writes files only.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "laeo/config.hpp"
#include "laeo/io.hpp"
#include "laeo/runtime.hpp"
#include "laeo/selfcheck.hpp"
#include "laeo/social.hpp"
#include "laeo/tracker.hpp"
#include "laeo/train.hpp"

namespace fs = std::filesystem;
using namespace laeo;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* sub, Common& c, bool need_out = true) {
  sub->add_option("--config", c.config_file, "flat key = value config file")->check(CLI::ExistingFile);
  sub->add_option("--set", c.sets, "override one key, key=value (repeatable)");
  sub->add_option("--seed", c.seed, "seed for every random choice");
  auto* o = sub->add_option("--out", c.out, "output directory");
  if (need_out) o->required();
}

RunConfig resolve(const Common& c, RunConfig base = {}) {
  if (!c.config_file.empty()) load_config(base, c.config_file);
  for (const auto& s : c.sets) apply_assignment(base, s);
  if (c.seed) base.seed = *c.seed;
  base.sync();
  base.validate();
  return base;
}

std::string out_dir(const Common& c, const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(c.out, ec);
  if (ec) throw IoError("cannot create '" + c.out + "': " + ec.message());
  nn::write_file((fs::path(c.out) / "config.txt").string(), config_text(cfg));
  return c.out;
}

std::string path_in(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

class Clock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void say(const std::string& s) { std::cerr << s << "\n"; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- track ------------------------------------------------------------------

int cmd_track(const Common& c, const std::string& detections) {
  const auto cfg = resolve(c);
  io::FrameSizes sizes;
  const auto dets = io::read_detections(detections, &sizes);
  const auto report = validate_dataset(dets, {}, {});
  if (!report.ok()) {
    for (const auto& v : report.violations) say(detections + ": " + v.record + ": " + v.message);
    throw ValidationError(std::to_string(report.violations.size()) + " invalid detection record(s)");
  }
  const auto tracks = tracker::link_detections(dets, cfg.linker);
  const auto dir = out_dir(c, cfg);
  nn::write_file(path_in(dir, "tracks.jsonl"), io::tracks_jsonl(tracks, sizes));
  std::cout << "tracks=" << tracks.size() << "\n";
  return 0;
}

// ---- synth ------------------------------------------------------------------

io::Annotations dataset_annotations(const std::vector<const synth::PairRecord*>& recs) {
  io::Annotations a;
  for (const auto* r : recs) {
    const int L = r->scene_length();
    const int f = r->tracks[0].start_frame + L / 2;  // central frame of every centred window
    const auto label = r->label == 1 ? LAEOLabel::LAEO : LAEOLabel::NotLAEO;
    a.pairs.push_back({r->id, f, r->tracks[0].box_at(f), r->tracks[1].box_at(f), label, r->id});
    ShotRecord s;
    s.shot_id = r->id;
    s.video_id = r->id;
    s.first = r->tracks[0].start_frame;
    s.last = r->tracks[0].end_frame();
    s.label = label;
    a.shots.push_back(std::move(s));
  }
  return a;
}

int cmd_synth(const Common& c, std::size_t pos, std::size_t neg) {
  const auto cfg = resolve(c);
  require(pos + neg > 0, "nothing to generate (--pos and --neg are both 0)");
  const auto ds = synth::generate_dataset(pos, neg, cfg.seed, cfg.synth);
  const auto dir = out_dir(c, cfg);
  io::write_dataset(dir, ds, cfg.synth);
  std::vector<const synth::PairRecord*> all;
  for (const auto& r : ds.records) all.push_back(&r);
  nn::write_file(path_in(dir, "annotations.jsonl"), io::annotations_jsonl(dataset_annotations(all)));
  for (const char* split : {"train", "val"})
    nn::write_file(path_in(dir, std::string("annotations_") + split + ".jsonl"),
                   io::annotations_jsonl(dataset_annotations(ds.split(split))));
  std::cout << "records=" << ds.records.size() << " positives=" << ds.count_label(1)
            << " train=" << ds.split("train").size() << " val=" << ds.split("val").size() << "\n";
  return 0;
}

// ---- pretrain ---------------------------------------------------------------

int cmd_pretrain(const Common& c) {
  const auto cfg = resolve(c);
  const auto dir = out_dir(c, cfg);
  Clock clock;
  const auto data = synth::generate_pose_dataset(std::size_t(cfg.pretrain_samples), cfg.model.T, cfg.seed, cfg.synth);
  const auto held = synth::generate_pose_dataset(200, cfg.model.T, derive_seed(cfg.seed, 0xB0D), cfg.synth);
  auto res = train::pretrain_headpose(model::build_pose_model(cfg.model, cfg.seed), cfg.model, data, cfg.pretrain,
                                      [&](const std::string& s) { say("[" + fmt("%.0f", clock.seconds()) + "s] " + s); });
  nn::save_checkpoint(path_in(dir, "pose.ckpt"), res.params);
  std::string loss = "#format=laeo-pretrain,version=1\nepoch,loss\n";
  for (std::size_t i = 0; i < res.epoch_loss.size(); ++i)
    loss += std::to_string(i + 1) + "," + fmt("%.6f", res.epoch_loss[i]) + "\n";
  nn::write_file(path_in(dir, "pretrain_loss.csv"), loss);
  nn::write_file(path_in(dir, "embeddings.csv"), train::embeddings_csv(res.params, cfg.model, held));
  std::cout << "final_loss=" << fmt("%.6f", res.epoch_loss.back())
            << " heldout_yaw_sign_accuracy=" << fmt("%.4f", train::yaw_sign_accuracy(res.params, cfg.model, held)) << "\n";
  return 0;
}

// ---- train ------------------------------------------------------------------

int cmd_train(const Common& c, const std::string& data_dir, const std::string& real_dir, const std::string& pretrained) {
  auto cfg = resolve(c);
  const auto data = io::read_dataset(data_dir);
  cfg.synth.camera.frame = data.frame;
  std::optional<io::LoadedDataset> real;
  if (!real_dir.empty()) real = io::read_dataset(real_dir);

  auto synthetic = data.data.split("train");
  auto val = data.data.split("val");
  std::vector<const synth::PairRecord*> real_train;
  if (real) {
    real_train = real->data.split("train");
    for (const auto* r : real->data.split("val")) val.push_back(r);
  }

  nn::ParamSet<float> init;
  if (pretrained.empty()) {
    init = model::build_laeonet(cfg.model, cfg.seed);
  } else {
    const auto pose = nn::load_checkpoint(pretrained);
    init = model::build_laeonet(cfg.model, cfg.seed, model::Init::PosePretrained, &pose);
  }
  const auto dir = out_dir(c, cfg);
  Clock clock;
  auto res = train::train(std::move(init), cfg.model, real_train, synthetic, val, cfg.synth, cfg.train,
                          [&](const std::string& s) { say("[" + fmt("%.0f", clock.seconds()) + "s] " + s); });
  nn::save_checkpoint(path_in(dir, "model.ckpt"), res.params);
  nn::write_file(path_in(dir, "history.csv"), train::history_csv(res.history));
  std::cout << "epochs=" << res.history.size();
  if (!val.empty()) std::cout << " val_ap=" << fmt("%.4f", res.history.back().val_ap);
  std::cout << "\n";
  return 0;
}

// ---- score ------------------------------------------------------------------

int cmd_score(const Common& c, const std::string& model_dir, const std::string& data_dir, const std::string& split) {
  RunConfig base;
  load_config(base, path_in(model_dir, "config.txt"));
  auto cfg = resolve(c, base);
  auto params = nn::load_checkpoint(path_in(model_dir, "model.ckpt"));
  const auto data = io::read_dataset(data_dir);
  cfg.synth.camera.frame = data.frame;
  require(split == "all" || split == "train" || split == "val", "--split must be all, train or val");
  const auto recs = split == "all" ? [&] {
    std::vector<const synth::PairRecord*> v;
    for (const auto& r : data.data.records) v.push_back(&r);
    return v;
  }() : data.data.split(split);

  const int T = cfg.model.T;
  std::vector<io::ScoreRecord> out;
  for (const auto* r : recs) {
    const int L = r->scene_length();
    require(L >= T, "record '" + r->id + "' is shorter than T");
    // Windows at the configured stride, laid out symmetrically around the centre.
    const int centre = headmap::central_offset(L, T);
    std::vector<int> offsets;
    for (int o = centre % cfg.window_stride; o + T <= L; o += cfg.window_stride) offsets.push_back(o);
    for (int o : offsets) {
      const auto s = synth::materialize(*r, T, cfg.model.M, cfg.synth, o);
      const int f = r->tracks[0].start_frame + o + T / 2;
      io::ScoreRecord rec;
      rec.pair = {r->tracks[0].video_id, f, r->tracks[0].box_at(f), r->tracks[1].box_at(f),
                  model::score_pair(params, cfg.model, s)};
      rec.track_a = r->tracks[0].track_id;
      rec.track_b = r->tracks[1].track_id;
      out.push_back(std::move(rec));
    }
  }
  const auto dir = out_dir(c, cfg);
  nn::write_file(path_in(dir, "scores.jsonl"), io::scores_jsonl(out));
  std::cout << "scored=" << out.size() << "\n";
  return 0;
}

// ---- eval -------------------------------------------------------------------

eval::ApResult shot_ap(const std::vector<io::ScoreRecord>& scores, const std::vector<ShotRecord>& shots) {
  std::vector<double> s;
  std::vector<bool> labels;
  std::size_t used = 0;
  for (const auto& shot : shots) {
    if (!shot.label || *shot.label == LAEOLabel::Ambiguous) continue;
    ++used;
    std::map<std::pair<int, int>, std::vector<eval::WindowScore>> by_pair;
    for (const auto& r : scores) {
      if (r.pair.video_id != shot.video_id || !shot.contains(r.pair.frame)) continue;
      require(r.track_a && r.track_b, "shot protocol needs track_a/track_b on every score record");
      by_pair[{std::min(*r.track_a, *r.track_b), std::max(*r.track_a, *r.track_b)}].push_back({r.pair.frame, 1, r.pair.score});
    }
    std::vector<eval::FrameSeries> series;
    for (auto& [k, w] : by_pair) series.push_back(eval::score_track_pair_series(std::move(w)));
    // A shot without any scored pair cannot hold a LAEO pair.
    s.push_back(series.empty() ? 0.0 : eval::score_shot(series));
    labels.push_back(*shot.label == LAEOLabel::LAEO);
  }
  require(used > 0, "no shots with a LAEO or NOT_LAEO label");
  return eval::average_precision(s, labels);
}

int cmd_eval(const Common& c, const std::string& scores_file, const std::string& ann_file, const std::string& protocol) {
  RunConfig cfg = resolve(c);
  if (!protocol.empty()) cfg.protocol = eval::protocol_from_string(protocol);
  const auto scores = io::read_scores(scores_file);
  const auto ann = io::read_annotations(ann_file);
  eval::ApResult r;
  if (cfg.protocol == eval::Protocol::Shot) {
    r = shot_ap(scores, ann.shots);
  } else {
    std::vector<eval::ScoredPair> preds;
    for (const auto& s : scores) preds.push_back(s.pair);
    r = eval::average_precision(preds, ann.pairs, cfg.protocol);
  }
  const auto dir = out_dir(c, cfg);
  nn::write_file(path_in(dir, "pr.csv"), eval::pr_csv(r));
  io::Json summary = io::header("laeo-eval");
  summary["protocol"] = std::string(eval::to_string(cfg.protocol));
  summary["ap"] = io::round6(r.ap);
  summary["positives"] = r.positives;
  summary["true_positives"] = r.true_positives;
  summary["ignored"] = r.ignored;
  summary["predictions"] = scores.size();
  nn::write_file(path_in(dir, "summary.json"), summary.dump(2) + "\n");
  std::cout << "AP=" << fmt("%.4f", r.ap) << "\n";
  return 0;
}

// ---- social -----------------------------------------------------------------

int cmd_social(const Common& c, const std::string& tracks_file, const std::string& scores_file, const std::string& ann_file) {
  const auto cfg = resolve(c);
  social::Episode ep;
  ep.tracks = io::read_tracks(tracks_file);
  const auto ann = io::read_annotations(ann_file);
  ep.shots = ann.shots;
  ep.characters = ann.characters;
  ep.labels = ann.interactions;
  require(!ep.shots.empty(), ann_file + ": no shot records");
  require(!ep.characters.empty(), ann_file + ": no character records");
  for (const auto& s : io::read_scores(scores_file)) {
    require(s.track_a && s.track_b, scores_file + ": social scoring needs track_a/track_b on every record");
    ep.scores.push_back({s.pair.video_id, *s.track_a, *s.track_b, s.pair.frame, s.pair.score});
  }
  const auto rows = social::pair_scores(ep, cfg.seed);
  const auto dir = out_dir(c, cfg);
  nn::write_file(path_in(dir, "pairs.csv"), social::rows_csv(rows));
  nn::write_file(path_in(dir, "friendness.dot"), social::to_dot(social::friendness_graph(rows)));
  io::Json summary = io::header("laeo-social-summary");
  summary["pairs"] = rows.size();
  const bool labeled = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.label.has_value(); });
  std::cout << "pairs=" << rows.size();
  if (labeled) {
    io::Json ap = io::Json::object();
    for (auto s : social::kAllScores) {
      const double v = social::interaction_ap(rows, s);
      ap[std::string(social::to_string(s))] = io::round6(v);
      std::cout << " " << social::to_string(s) << "=" << fmt("%.4f", v);
    }
    summary["interaction_ap"] = ap;
  }
  std::cout << "\n";
  nn::write_file(path_in(dir, "summary.json"), summary.dump(2) + "\n");
  return 0;
}

// ---- gradcheck --------------------------------------------------------------

int cmd_gradcheck(const Common& c, double tol) {
  const auto cfg = resolve(c);
  Clock clock;
  const auto reports = selfcheck::run_all(cfg.seed, tol);
  double worst = 0;
  bool ok = true;
  for (const auto& r : reports) {
    std::printf("%-24s max_rel_error=%.3e %s\n", r.name.c_str(), r.report.max_rel_error, r.passed() ? "ok" : "FAIL");
    for (const auto& d : r.dead) std::printf("  %s has an identically zero gradient\n", d.c_str());
    worst = std::max(worst, r.report.max_rel_error);
    ok = ok && r.passed();
  }
  std::printf("max relative error = %.3e (tol %.0e) in %.1fs\n", worst, tol, clock.seconds());
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  tune_allocator();
  CLI::App app{"laeo: mutual-gaze detection toolkit"};
  app.require_subcommand(1);
  app.footer(config_help());

  Common track_c, synth_c, pre_c, train_c, score_c, eval_c, social_c, grad_c;
  std::string detections, data_dir, real_dir, pretrained, model_dir, split = "all", scores_file, ann_file, protocol,
      tracks_file;
  std::size_t pos = 0, neg = 0;
  double tol = 1e-4;
  bool tiny = true;

  auto* track = app.add_subcommand("track", "link head detections into tracks");
  add_common(track, track_c);
  track->add_option("--detections", detections, "detections JSONL")->required();

  auto* syn = app.add_subcommand("synth", "generate a synthetic LAEO pair dataset");
  add_common(syn, synth_c);
  syn->add_option("--pos", pos, "number of LAEO pairs")->required();
  syn->add_option("--neg", neg, "number of not-LAEO pairs")->required();

  auto* pre = app.add_subcommand("pretrain", "pre-train the head branch on synthetic head poses");
  add_common(pre, pre_c);

  auto* trn = app.add_subcommand("train", "train the LAEO network");
  add_common(trn, train_c);
  trn->add_option("--data", data_dir, "dataset directory (synthetic pairs)")->required();
  trn->add_option("--real", real_dir, "dataset directory of real pairs");
  trn->add_option("--pretrained", pretrained, "pose checkpoint for the head branch");

  auto* sc = app.add_subcommand("score", "score every pair window of a dataset");
  add_common(sc, score_c);
  sc->add_option("--model", model_dir, "directory written by train")->required();
  sc->add_option("--data", data_dir, "dataset directory")->required();
  sc->add_option("--split", split, "all, train or val")->capture_default_str();

  auto* ev = app.add_subcommand("eval", "average precision of scores against annotations");
  add_common(ev, eval_c);
  ev->add_option("--scores", scores_file, "scores JSONL")->required();
  ev->add_option("--annotations", ann_file, "annotations JSONL")->required();
  ev->add_option("--protocol", protocol, "frame_iou, ava or shot (overrides eval.protocol)");

  auto* soc = app.add_subcommand("social", "Average-LAEO and baselines per character pair");
  add_common(soc, social_c);
  soc->add_option("--tracks", tracks_file, "tracks JSONL")->required();
  soc->add_option("--scores", scores_file, "scores JSONL with track ids")->required();
  soc->add_option("--annotations", ann_file, "shots, characters and interaction labels")->required();

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every layer, loss and the tiny model");
  add_common(gc, grad_c, false);
  gc->add_flag("--tiny", tiny, "check the T=2, M=2 two-channel model (always on)");
  gc->add_option("--tol", tol, "maximum relative error")->capture_default_str();

  for (auto* s : app.get_subcommands({})) s->footer(config_help());

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (track->parsed()) return cmd_track(track_c, detections);
    if (syn->parsed()) return cmd_synth(synth_c, pos, neg);
    if (pre->parsed()) return cmd_pretrain(pre_c);
    if (trn->parsed()) return cmd_train(train_c, data_dir, real_dir, pretrained);
    if (sc->parsed()) return cmd_score(score_c, model_dir, data_dir, split);
    if (ev->parsed()) return cmd_eval(eval_c, scores_file, ann_file, protocol);
    if (soc->parsed()) return cmd_social(social_c, tracks_file, scores_file, ann_file);
    if (gc->parsed()) return cmd_gradcheck(grad_c, tol);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
