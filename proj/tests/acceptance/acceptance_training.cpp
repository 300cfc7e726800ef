// SPDX-License-Identifier: Apache-2.0
// Criteria that need trained networks.
#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>

#include "acceptance.hpp"
#include "semlink/baselines/baselines.hpp"
#include "semlink/cli/cli.hpp"
#include "semlink/cli/sweep.hpp"
#include "semlink/io/array_file.hpp"
#include "semlink/trainer/trainer.hpp"

namespace semlink::acceptance {

namespace fs = std::filesystem;
using train::Variant;

ExperimentConfig Context::preset(const std::string& name) const {
  auto cfg = ExperimentConfig::load((fs::path(config_dir) / (name + ".json")).string());
  cfg.paths.out_dir = (fs::path(out_dir) / name).string();
  return cfg;
}

std::string fmt(double v, int digits) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

namespace {

fs::path fresh(const Context& ctx, const std::string& name) {
  const fs::path p = fs::path(ctx.out_dir) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

Outcome physical_pretraining(const Context& ctx) {
  const fs::path dir = fresh(ctx, "c4");
  ExperimentConfig cfg = ctx.preset("desk");
  const auto& d = cfg.dims;
  const Stopwatch clock;
  train::System sys(cfg, Variant::superposed);
  train::MetricsLog log;
  train::train_stage2(sys, log, (dir / "stage2").string());
  const double t = clock.seconds();
  log.write((dir / "stage2_metrics.csv").string());

  const double learned = train::evaluate_eta(sys, sem::Split::test);
  const auto [b, e] = sem::split_range(cfg.data.n_channels, sem::Split::test);
  double ub = 0.0, rnd = 0.0;
  for (std::size_t i = b; i < e; ++i) {
    const auto ch = train::dataset_channel(sys, i);
    ub += base::svd_bound(ch, d, cfg.physics.P_t, cfg.noise_var());
    num::Rng r = sys.streams.noise.split("random_beams").split(i);
    const auto bf = base::random_beamformers(d, r);
    rnd += phy::spectral_efficiency(bf.W, bf.F, ch, d.L, cfg.physics.P_t, cfg.noise_var()).item();
  }
  ub /= double(e - b);
  rnd /= double(e - b);
  Outcome o;
  o.pass = learned >= 0.5 * ub && learned >= 1.5 * rnd && t < 900.0;
  o.detail = "learned eta " + fmt(learned) + " vs 0.5 x SVD bound " + fmt(0.5 * ub) + " and 1.5 x random " +
             fmt(1.5 * rnd) + " over " + std::to_string(e - b) + " held-out channels; training " + fmt(t, 3) +
             " s (limit 900)";
  return o;
}

Outcome semantic_pretraining(const Context& ctx) {
  const fs::path dir = fresh(ctx, "c5");
  const ExperimentConfig cfg = ctx.preset("desk");
  const Stopwatch clock;
  train::System sys(cfg, Variant::superposed);
  train::MetricsLog log;
  const auto r = train::train_stage1(sys, log, (dir / "stage1").string());
  const double t = clock.seconds();
  log.write((dir / "stage1_metrics.csv").string());
  const double miou = train::evaluate(sys, sem::Split::val, train::Path::identity).miou;

  // the second modality carries the class-3 shapes; without it they vanish
  train::System blind(cfg, Variant::superposed);
  blind.blank_user = 1;
  train::MetricsLog blind_log;
  train::train_stage1(blind, blind_log, "");
  blind_log.write((dir / "ablation_metrics.csv").string());
  const auto ab = train::evaluate(blind, sem::Split::val, train::Path::identity);
  const double iou3 = ab.class_iou.size() > 3 ? ab.class_iou[3] : train::kNaN;

  Outcome o;
  o.pass = miou >= 0.85 && r.epochs_run <= 30 && t < 600.0 && iou3 < 0.1;
  o.detail = "val mIoU " + fmt(miou) + " (>= 0.85) after " + std::to_string(r.epochs_run) + " epochs in " +
             fmt(t, 3) + " s (limit 600); single-modality class-3 IoU " + fmt(iou3) + " (< 0.1)";
  return o;
}

namespace {

using Table = std::map<std::pair<std::uint64_t, std::string>, std::map<double, double>>;

void collect(Table& t, const std::vector<cli::PointResult>& rows) {
  for (const auto& r : rows) t[{r.seed, train::to_string(r.variant) + "@" + cli::to_string(r.axis)}][r.value] = r.miou;
}

std::string series(const Table& t, std::uint64_t seed, const std::string& variant) {
  std::ostringstream os;
  const auto it = t.find({seed, variant});
  if (it == t.end()) return "-";
  bool first = true;
  for (const auto& [v, m] : it->second) {
    os << (first ? "" : " ") << v << ":" << fmt(m, 3);
    first = false;
  }
  return os.str();
}

double at(const Table& t, std::uint64_t seed, const std::string& variant, double value) {
  const auto it = t.find({seed, variant});
  if (it == t.end()) return train::kNaN;
  const auto jt = it->second.find(value);
  return jt == it->second.end() ? train::kNaN : jt->second;
}

}  // namespace

Outcome sweep_trends(const Context& ctx) {
  const fs::path dir = fresh(ctx, "c6");
  const ExperimentConfig cfg = ctx.preset("sweep");
  const std::vector<std::uint64_t> seeds{0, 1, 2};
  Table table;
  std::vector<cli::PointResult> all;
  auto sweep = [&](cli::Axis axis, std::vector<double> values, Variant v) {
    cli::SweepOptions opt;
    opt.axis = axis;
    opt.values = std::move(values);
    opt.seeds = seeds;
    opt.variants = {v};
    opt.out_dir = (dir / cli::to_string(axis)).string();
    const auto rows = cli::run_sweep(cfg, opt);
    collect(table, rows);
    all.insert(all.end(), rows.begin(), rows.end());
  };

  Stopwatch l_clock;
  sweep(cli::Axis::L, {1, 2, 4, 8}, Variant::superposed);
  sweep(cli::Axis::L, {1}, Variant::dmrs_baseline);
  const double t_l = l_clock.seconds();
  Stopwatch q_clock;
  sweep(cli::Axis::Q, {1, 2, 4}, Variant::superposed);
  sweep(cli::Axis::Q, {1}, Variant::orthogonal);
  const double t_q = q_clock.seconds();
  io::write_text((dir / "trends.csv").string(), cli::sweep_csv(all));

  const std::string sp = "superposed";
  int a = 0, b = 0, c = 0, d = 0;
  std::ostringstream os;
  for (auto s : seeds) {
    // NaN (a failed point) never satisfies a comparison
    bool mono = true;
    for (double l : {1.0, 2.0, 4.0})
      mono = mono && at(table, s, sp + "@L", l * 2) >= at(table, s, sp + "@L", l) - 0.03;
    a += mono;
    b += at(table, s, sp + "@Q", 1) >= at(table, s, "orthogonal@Q", 1);
    c += at(table, s, sp + "@L", 1) > at(table, s, "dmrs_baseline@L", 1);
    d += at(table, s, sp + "@Q", 2) > at(table, s, sp + "@Q", 1) && at(table, s, sp + "@Q", 4) > at(table, s, sp + "@Q", 2);
  }
  for (auto s : seeds)
    os << "seed " << s << ": L[" << series(table, s, sp + "@L") << "] dmrs " << fmt(at(table, s, "dmrs_baseline@L", 1), 3)
       << " Q[" << series(table, s, sp + "@Q") << "] orth " << fmt(at(table, s, "orthogonal@Q", 1), 3) << "; ";
  os << "(a) L monotone " << a << "/3, (b) superposed>=orthogonal " << b << "/3, (c) >DMRS at L=1 " << c
     << "/3, (d) Q increasing " << d << "/3; L sweep " << fmt(t_l, 4) << " s, Q sweep " << fmt(t_q, 4)
     << " s (limit 2700 each)";
  return {a >= 2 && b >= 2 && c >= 2 && d >= 2 && t_l < 2700.0 && t_q < 2700.0, os.str()};
}

Outcome reproducibility(const Context& ctx) {
  const fs::path dir = fresh(ctx, "c7");
  ExperimentConfig cfg = ctx.preset("desk");
  cfg.data.n_samples = 120;
  cfg.data.n_channels = 120;
  cfg.training.seed = 7;
  cfg.training.log_wallclock = false;
  for (auto* s : {&cfg.training.stage1, &cfg.training.stage2, &cfg.training.stage3}) {
    s->epochs = 2;
    s->max_train = 48;
  }
  const auto cfg_path = (dir / "config.json").string();
  cfg.save(cfg_path);
  std::ostringstream sink;
  for (const char* run : {"a", "b"})
    for (const char* stage : {"1", "2", "3"}) {
      const std::vector<std::string> args{"semlink", "train",       "--stage", stage, "--config",
                                          cfg_path,  "--out", (dir / run).string()};
      if (const int code = cli::run(args, sink, sink); code != 0)
        return {false, std::string("run ") + run + " stage " + stage + " exited " + std::to_string(code) + ": " +
                           sink.str()};
    }
  std::size_t files = 0, same = 0;
  std::string first_diff;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "a")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir / "a");
    ++files;
    const fs::path other = dir / "b" / rel;
    if (fs::exists(other) && io::read_text(entry.path().string()) == io::read_text(other.string()))
      ++same;
    else if (first_diff.empty())
      first_diff = rel.string();
  }
  std::size_t files_b = 0;
  for (const auto& entry : fs::recursive_directory_iterator(dir / "b")) files_b += entry.is_regular_file();
  Outcome o;
  o.pass = files > 0 && same == files && files_b == files;
  o.detail = std::to_string(same) + "/" + std::to_string(files) + " files byte-identical across two runs (" +
             std::to_string(files_b) + " in the second)" + (first_diff.empty() ? "" : "; first differing " + first_diff);
  return o;
}

}  // namespace semlink::acceptance
