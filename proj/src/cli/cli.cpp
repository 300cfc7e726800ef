// SPDX-License-Identifier: Apache-2.0
#include "semlink/cli/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include "semlink/baselines/baselines.hpp"
#include "semlink/cli/sweep.hpp"
#include "semlink/error.hpp"
#include "semlink/io/array_file.hpp"
#include "semlink/trainer/trainer.hpp"

namespace semlink::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment config JSON (default: built-in defaults)");
  app->add_option("--seed", c.seed, "master seed, overrides training.seed");
  app->add_option("--out", c.out, "output directory (default: paths.out_dir)");
}

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : ExperimentConfig::load(c.config);
  if (c.seed) cfg.training.seed = *c.seed;
  if (!c.out.empty()) cfg.paths.out_dir = c.out;
  cfg.validate();
  return cfg;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

sem::Split split_from(const std::string& s) {
  if (s == "train") return sem::Split::train;
  if (s == "val") return sem::Split::val;
  if (s == "test") return sem::Split::test;
  throw UsageError("unknown split '" + s + "' (train | val | test)");
}

std::string path_in(const ExperimentConfig& cfg, const std::string& name) {
  return (fs::path(cfg.paths.out_dir) / name).string();
}

void write_csv(const std::string& path, const std::string& text, std::ostream& out) {
  fs::create_directories(fs::path(path).parent_path());
  io::write_text(path, text);
  out << "wrote " << path << '\n';
}

// ---- subcommands ----------------------------------------------------------------

void gen_channels(const ExperimentConfig& cfg, std::size_t count, std::size_t shard, std::ostream& out) {
  if (shard == 0) throw UsageError("--shard must be positive");
  const train::System sys(cfg, train::Variant::superposed);
  fs::create_directories(cfg.paths.out_dir);
  for (std::size_t b = 0, part = 0; b < count; b += shard, ++part) {
    std::vector<channel::ChannelSet> sets;
    for (std::size_t i = b; i < std::min(count, b + shard); ++i) {
      sets.push_back(train::dataset_channel(sys, i));
      sets.back().seed = i;
    }
    char name[32];
    std::snprintf(name, sizeof name, "channels_%03zu", part);
    channel::export_channels(path_in(cfg, name), sets, cfg);
    out << "wrote " << path_in(cfg, name) << ".bin (" << sets.size() << " channel sets)\n";
  }
}

void gen_dataset(const ExperimentConfig& cfg, std::ostream& out) {
  const train::Streams streams(cfg.training.seed);
  fs::create_directories(cfg.paths.out_dir);
  sem::export_dataset(path_in(cfg, "dataset"), cfg, streams.data, 0, cfg.data.n_samples);
  out << "wrote " << path_in(cfg, "dataset") << ".bin (" << cfg.data.n_samples << " samples)\n";
}

std::string eval_header(std::size_t classes) {
  std::string h = "stage,variant,split,samples,miou,pixel_accuracy,eta";
  for (std::size_t c = 0; c < classes; ++c) h += ",iou_" + std::to_string(c);
  return h;
}

std::string eval_row(int stage, train::Variant v, const std::string& split, const train::EvalResult& r) {
  std::string row = std::to_string(stage) + "," + train::to_string(v) + "," + split + "," +
                    std::to_string(r.samples) + "," + fmt(r.miou) + "," + fmt(r.pixel_accuracy) + "," + fmt(r.eta);
  for (double x : r.class_iou) row += "," + fmt(x);
  return row;
}

void train_cmd(const ExperimentConfig& cfg, int stage, train::Variant variant, std::string s1, std::string s2,
               bool resume, std::ostream& out) {
  if (stage < 1 || stage > 3) throw UsageError("--stage must be 1, 2 or 3");
  train::System sys(cfg, variant);
  const std::string dir = path_in(cfg, "stage" + std::to_string(stage));
  if (stage == 3) {
    train::prepare_stage3(sys, s1.empty() ? path_in(cfg, "stage1") : s1, s2.empty() ? path_in(cfg, "stage2") : s2);
  }
  if (resume && fs::exists(fs::path(dir) / "manifest.json")) {
    const auto info = train::load_checkpoint(dir, train::stage_params(sys, stage), train::stage_hash(cfg, stage),
                                             stage == 2 ? "" : train::to_string(variant));
    out << "resuming stage " << stage << " from epoch " << info.epoch << '\n';
  }
  train::MetricsLog log;
  train::StageResult res;
  if (stage == 1) res = train::train_stage1(sys, log, dir);
  if (stage == 2) res = train::train_stage2(sys, log, dir);
  if (stage == 3) res = train::train_stage3(sys, log, dir);
  log.write(path_in(cfg, "stage" + std::to_string(stage) + "_metrics.csv"));
  out << "stage " << stage << ": best " << (stage == 2 ? "eta " : "miou ") << fmt(res.best_metric) << " at epoch "
      << res.best_epoch << " of " << res.epochs_run << "; checkpoint " << dir << '\n';
}

void eval_cmd(const ExperimentConfig& cfg, const std::string& ckpt, const std::string& split_name,
              std::ostream& out) {
  const auto info = train::read_checkpoint_info(ckpt);
  const sem::Split split = split_from(split_name);
  const train::Variant variant = info.variant.empty() ? train::Variant::superposed
                                                      : train::variant_from_string(info.variant);
  train::System sys(cfg, variant);
  train::load_checkpoint(ckpt, train::stage_params(sys, info.stage), train::stage_hash(cfg, info.stage),
                         info.stage == 2 ? "" : info.variant);
  train::EvalResult r;
  if (info.stage == 2) {
    r.eta = train::evaluate_eta(sys, split);
    r.samples = [&] {
      const auto [b, e] = sem::split_range(cfg.data.n_channels, split);
      return e - b;
    }();
  } else {
    r = train::evaluate(sys, split, info.stage == 1 ? train::Path::identity : train::Path::link);
  }
  const std::string text = eval_header(cfg.dims.C) + "\n" + eval_row(info.stage, variant, split_name, r) + "\n";
  out << text;
  write_csv(path_in(cfg, "eval.csv"), text, out);
}

void baseline_cmd(const ExperimentConfig& cfg, const std::string& kind, const std::string& split_name,
                  std::ostream& out) {
  const sem::Split split = split_from(split_name);
  const Dims& d = cfg.dims;
  if (kind == "svd-bound" || kind == "pca") {
    const train::System sys(cfg, train::Variant::dmrs_baseline);
    const auto [b, e] = sem::split_range(cfg.data.n_channels, split);
    std::ostringstream os;
    os << (kind == "pca" ? "index,eta_pca_perfect,eta_pca_estimated,eta_random\n" : "index,eta_ub\n");
    double total = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      const auto ch = train::dataset_channel(sys, i);
      if (kind == "svd-bound") {
        const double ub = base::svd_bound(ch, d, cfg.physics.P_t, cfg.noise_var());
        total += ub;
        os << i << ',' << fmt(ub) << '\n';
        continue;
      }
      num::NoGradGuard guard;
      auto eta = [&](const base::Beamformers& bf) {
        return phy::spectral_efficiency(bf.W, bf.F, ch, d.L, cfg.physics.P_t, cfg.noise_var()).item();
      };
      num::Rng noise = sys.streams.noise.split("eval").split(i);
      num::Rng rnd = sys.streams.noise.split("random_beams").split(i);
      const double perfect = eta(base::perfect_pca(ch, d));
      const double est = eta(base::estimated_pca(sys.baseline->sounding, ch, d, cfg.physics.P_t, cfg.noise_var(),
                                                 noise));
      total += est;
      os << i << ',' << fmt(perfect) << ',' << fmt(est) << ',' << fmt(eta(base::random_beamformers(d, rnd))) << '\n';
    }
    write_csv(path_in(cfg, kind == "pca" ? "baseline_pca.csv" : "baseline_svd_bound.csv"), os.str(), out);
    out << "mean " << (kind == "pca" ? "estimated-PCA eta " : "eta_ub ") << fmt(total / double(e - b)) << " over "
        << e - b << " channels\n";
    return;
  }
  if (kind == "dmrs") {
    train::System sys(cfg, train::Variant::dmrs_baseline);
    train::MetricsLog log;
    train::train_baseline(sys, log, path_in(cfg, "baseline_dmrs"));
    log.write(path_in(cfg, "baseline_dmrs_metrics.csv"));
    const auto r = train::evaluate(sys, split, train::Path::link);
    out << eval_header(d.C) << '\n' << eval_row(4, train::Variant::dmrs_baseline, split_name, r) << '\n';
    return;
  }
  if (kind == "orthogonal") {
    const auto r = run_point(cfg, train::Variant::orthogonal, cfg.paths.out_dir, path_in(cfg, "orthogonal"));
    out << "orthogonal test miou " << fmt(r.miou) << " eta " << fmt(r.eta) << '\n';
    return;
  }
  throw UsageError("unknown baseline '" + kind + "' (pca | dmrs | svd-bound | orthogonal)");
}

void sweep_cmd(const ExperimentConfig& cfg, const std::string& axis, const std::vector<double>& values,
               std::vector<std::uint64_t> seeds, const std::vector<std::string>& variants, std::ostream& out) {
  SweepOptions opt;
  opt.axis = axis_from_string(axis);
  opt.values = values;
  opt.seeds = seeds.empty() ? std::vector<std::uint64_t>{cfg.training.seed} : std::move(seeds);
  opt.variants.clear();
  for (const auto& v : variants) opt.variants.push_back(train::variant_from_string(v));
  opt.out_dir = path_in(cfg, "sweep_" + axis);
  opt.on_point = [&](const PointResult& r) {
    out << axis << '=' << fmt(r.value) << ' ' << train::to_string(r.variant) << " seed " << r.seed << ": miou "
        << fmt(r.miou) << ' ' << r.status << std::endl;
  };
  const auto rows = run_sweep(cfg, opt);
  write_csv(path_in(cfg, "sweep_" + axis + ".csv"), sweep_csv(rows), out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learned CSI-RS, channel-semantic feedback and semantic superposition link simulator", "semlink"};
  app.require_subcommand(1);
  Common common;

  auto* gc = app.add_subcommand("gen-channels", "export the channel dataset");
  add_common(gc, common);
  std::optional<std::size_t> count;
  std::size_t shard = 250;
  gc->add_option("--count", count, "channel sets to export (default: data.n_channels)");
  gc->add_option("--shard", shard, "channel sets per file");

  auto* gd = app.add_subcommand("gen-dataset", "export the synthetic multimodal dataset");
  add_common(gd, common);

  auto* tr = app.add_subcommand("train", "run one training stage");
  add_common(tr, common);
  int stage = 0;
  std::string variant = "superposed", s1, s2;
  bool resume = false;
  tr->add_option("--stage", stage, "1: semantic, 2: physical, 3: joint")->required();
  tr->add_option("--variant", variant, "superposed | orthogonal");
  tr->add_option("--stage1", s1, "stage-1 checkpoint for stage 3 (default: <out>/stage1)");
  tr->add_option("--stage2", s2, "stage-2 checkpoint for stage 3 (default: <out>/stage2)");
  tr->add_flag("--resume", resume, "start from the stage's existing checkpoint");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(ev, common);
  std::string ckpt, split = "test";
  ev->add_option("--ckpt", ckpt, "checkpoint directory")->required();
  ev->add_option("--split", split, "train | val | test");

  auto* bl = app.add_subcommand("baseline", "classical references");
  add_common(bl, common);
  std::string kind;
  bl->add_option("kind", kind, "pca | dmrs | svd-bound | orthogonal")->required();
  bl->add_option("--split", split, "train | val | test");

  auto* sw = app.add_subcommand("sweep", "train and evaluate along one axis");
  add_common(sw, common);
  std::string axis;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> variants{"superposed"};
  sw->add_option("axis", axis, "L | B | Q | snr")->required();
  sw->add_option("--values", values, "axis values")->required()->delimiter(',');
  sw->add_option("--seeds", seeds, "master seeds (default: --seed)")->delimiter(',');
  sw->add_option("--variants", variants, "superposed, orthogonal, dmrs_baseline")->delimiter(',');

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    const ExperimentConfig cfg = load_config(common);
    if (gc->parsed()) gen_channels(cfg, count.value_or(cfg.data.n_channels), shard, out);
    if (gd->parsed()) gen_dataset(cfg, out);
    if (tr->parsed()) train_cmd(cfg, stage, train::variant_from_string(variant), s1, s2, resume, out);
    if (ev->parsed()) eval_cmd(cfg, ckpt, split, out);
    if (bl->parsed()) baseline_cmd(cfg, kind, split, out);
    if (sw->parsed()) sweep_cmd(cfg, axis, values, seeds, variants, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}

}  // namespace semlink::cli
