// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "semlink/trainer/trainer.hpp"

namespace semlink::cli {

enum class Axis { L, B, Q, snr };
Axis axis_from_string(const std::string& s);
std::string to_string(Axis a);

/// cfg with the swept field set to `value`.
ExperimentConfig apply_axis(ExperimentConfig cfg, Axis axis, double value);

struct PointResult {
  Axis axis = Axis::L;
  double value = 0.0;
  train::Variant variant = train::Variant::superposed;
  std::uint64_t seed = 0;
  double miou = train::kNaN, pixel_accuracy = train::kNaN, eta = train::kNaN;
  std::string status = "ok";
};

/// Trains and evaluates one operating point on the test split. Stage-1 and
/// stage-2 checkpoints are cached under `cache_dir` keyed by their hash (and
/// SNR for stage 2), so points that share a pretrained stage reuse it.
/// Per-epoch metrics go to <point_dir>/metrics.csv when point_dir is set.
PointResult run_point(const ExperimentConfig& cfg, train::Variant variant, const std::string& cache_dir,
                      const std::string& point_dir);

/// Loads the stage checkpoint at `dir` if it matches, otherwise trains the
/// stage, writing the checkpoint there. Returns true when it was reused.
bool ensure_stage(train::System& sys, int stage, const std::string& dir, train::MetricsLog& log);

struct SweepOptions {
  Axis axis = Axis::L;
  std::vector<double> values;
  std::vector<std::uint64_t> seeds;
  std::vector<train::Variant> variants{train::Variant::superposed};
  std::string out_dir;
  std::function<void(const PointResult&)> on_point;
};

/// Every (seed, value, variant) point, cached per seed under
/// <out_dir>/seed<N>/; a failing point is recorded with its message and the
/// sweep continues.
std::vector<PointResult> run_sweep(const ExperimentConfig& base, const SweepOptions& opt);

inline constexpr const char* kSweepHeader = "axis,value,variant,seed,miou,pixel_accuracy,eta,status";
std::string sweep_csv(const std::vector<PointResult>& rows);

}  // namespace semlink::cli
