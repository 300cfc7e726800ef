// SPDX-License-Identifier: Apache-2.0
#include "semlink/cli/sweep.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "semlink/error.hpp"

namespace semlink::cli {

namespace fs = std::filesystem;

Axis axis_from_string(const std::string& s) {
  if (s == "L") return Axis::L;
  if (s == "B") return Axis::B;
  if (s == "Q") return Axis::Q;
  if (s == "snr") return Axis::snr;
  throw UsageError("unknown sweep axis '" + s + "' (L | B | Q | snr)");
}

std::string to_string(Axis a) {
  switch (a) {
    case Axis::L: return "L";
    case Axis::B: return "B";
    case Axis::Q: return "Q";
    case Axis::snr: return "snr";
  }
  return "L";
}

ExperimentConfig apply_axis(ExperimentConfig cfg, Axis axis, double value) {
  auto count = [&](const char* name) {
    if (!(value >= 1.0) || value != std::floor(value)) {
      throw ConfigError(std::string(name) + " sweep values must be positive integers");
    }
    return static_cast<std::size_t>(value);
  };
  switch (axis) {
    case Axis::L: cfg.dims.L = count("L"); break;
    case Axis::B: cfg.dims.B = count("B"); break;
    case Axis::Q: cfg.dims.Q = count("Q"); break;
    case Axis::snr: cfg.physics.snr_db = value; break;
  }
  cfg.validate();
  return cfg;
}

namespace {

std::string num_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string stage_dir(const ExperimentConfig& cfg, const std::string& cache, int stage, train::Variant v) {
  std::string name = "stage" + std::to_string(stage) + "_" + hex64(train::stage_hash(cfg, stage));
  if (stage == 1) name += "_" + train::to_string(v);
  if (stage == 2) name += "_snr" + num_label(cfg.physics.snr_db);
  return (fs::path(cache) / name).string();
}

}  // namespace

bool ensure_stage(train::System& sys, int stage, const std::string& dir, train::MetricsLog& log) {
  const std::string variant = stage == 2 ? "" : train::to_string(sys.variant());
  if (fs::exists(fs::path(dir) / "manifest.json")) {
    const auto info = train::read_checkpoint_info(dir);
    if (info.stage == stage && info.config_hash == train::stage_hash(sys.config(), stage) &&
        (variant.empty() || info.variant == variant)) {
      train::load_checkpoint(dir, train::stage_params(sys, stage), info.config_hash, variant);
      return true;
    }
  }
  if (stage == 1) {
    train::train_stage1(sys, log, dir);
  } else if (stage == 2) {
    train::train_stage2(sys, log, dir);
  } else {
    throw UsageError("only stages 1 and 2 are cached");
  }
  return false;
}

PointResult run_point(const ExperimentConfig& cfg, train::Variant variant, const std::string& cache_dir,
                      const std::string& point_dir) {
  PointResult r;
  r.variant = variant;
  r.seed = cfg.training.seed;
  train::System sys(cfg, variant);
  train::MetricsLog log;
  if (variant == train::Variant::dmrs_baseline) {
    train::train_baseline(sys, log, point_dir.empty() ? "" : (fs::path(point_dir) / "checkpoint").string());
  } else {
    ensure_stage(sys, 1, stage_dir(cfg, cache_dir, 1, variant), log);
    ensure_stage(sys, 2, stage_dir(cfg, cache_dir, 2, variant), log);
    train::train_stage3(sys, log, point_dir.empty() ? "" : (fs::path(point_dir) / "checkpoint").string());
  }
  if (!point_dir.empty()) log.write((fs::path(point_dir) / "metrics.csv").string());
  const auto e = train::evaluate(sys, sem::Split::test, train::Path::link);
  r.miou = e.miou;
  r.pixel_accuracy = e.pixel_accuracy;
  r.eta = e.eta;
  return r;
}

std::vector<PointResult> run_sweep(const ExperimentConfig& base, const SweepOptions& opt) {
  if (opt.values.empty()) throw UsageError("sweep needs at least one value");
  if (opt.seeds.empty()) throw UsageError("sweep needs at least one seed");
  std::vector<PointResult> rows;
  for (auto seed : opt.seeds) {
    const fs::path seed_dir = fs::path(opt.out_dir) / ("seed" + std::to_string(seed));
    for (double value : opt.values) {
      for (auto variant : opt.variants) {
        PointResult r;
        try {
          ExperimentConfig cfg = base;
          cfg.training.seed = seed;
          cfg = apply_axis(cfg, opt.axis, value);
          const auto point = seed_dir / (to_string(opt.axis) + num_label(value) + "_" + train::to_string(variant));
          r = run_point(cfg, variant, seed_dir.string(), opt.out_dir.empty() ? "" : point.string());
        } catch (const std::exception& ex) {
          r.variant = variant;
          r.seed = seed;
          r.status = std::string("error: ") + ex.what();
        }
        r.axis = opt.axis;
        r.value = value;
        rows.push_back(r);
        if (opt.on_point) opt.on_point(r);
      }
    }
  }
  return rows;
}

namespace {

std::string field(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_text(std::string s) {
  for (auto& c : s) {
    if (c == ',' || c == '\n' || c == '\r' || c == '"') c = ' ';
  }
  return s;
}

}  // namespace

std::string sweep_csv(const std::vector<PointResult>& rows) {
  std::ostringstream os;
  os << kSweepHeader << '\n';
  for (const auto& r : rows) {
    os << to_string(r.axis) << ',' << field(r.value) << ',' << train::to_string(r.variant) << ',' << r.seed << ','
       << field(r.miou) << ',' << field(r.pixel_accuracy) << ',' << field(r.eta) << ',' << csv_text(r.status)
       << '\n';
  }
  return os.str();
}

}  // namespace semlink::cli
