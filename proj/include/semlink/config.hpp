// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "semlink/nn/blocks.hpp"

namespace semlink {

struct Dims {
  std::size_t N_t = 4, N_r = 16, N_RF_t = 2, N_RF_r = 2, N_c = 16;
  std::size_t L = 4, B = 64, Q = 2, K = 2;
  std::size_t H = 32, W = 32, C = 4;
  std::size_t d_s = 16, H_s = 4, W_s = 4, d_CSI = 8, d_c = 8;
  std::size_t d_model = 32, U = 2, n_heads = 4, d_ff = 64;
  std::size_t codec_width = 8;

  bool operator==(const Dims&) const = default;
};

struct Physics {
  double f_c = 28e9;
  double delta_f = 120e3;
  double v_max_kmh = 120.0;
  double tau_max_samples = 16.0;
  std::size_t L_p_min = 3, L_p_max = 6;
  double snr_db = 0.0;
  double P_t = 1.0;

  bool operator==(const Physics&) const = default;
};

struct DataConfig {
  std::size_t n_samples = 2000;
  std::size_t n_channels = 2500;
  std::size_t shapes_min = 1, shapes_max = 3;

  bool operator==(const DataConfig&) const = default;
};

struct StageSchedule {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double lr = 1e-4;
  std::size_t patience = 10;
  /// Caps the training samples used per epoch (0 = the whole split).
  std::size_t max_train = 0;

  bool operator==(const StageSchedule&) const = default;
};

struct TrainingConfig {
  std::uint64_t seed = 0;
  StageSchedule stage1{30, 16, 1e-4, 10, 0};
  StageSchedule stage2{30, 128, 1e-4, 10, 0};
  StageSchedule stage3{30, 16, 1e-4, 10, 0};
  double clip_norm = 1.0;
  /// Write elapsed seconds into the metrics log; off gives byte-stable logs.
  bool log_wallclock = true;

  bool operator==(const TrainingConfig&) const = default;
};

struct Paths {
  std::string out_dir = "runs";

  bool operator==(const Paths&) const = default;
};

/// Single source of truth for a run.
struct ExperimentConfig {
  Dims dims;
  Physics physics;
  DataConfig data;
  TrainingConfig training;
  Paths paths;

  bool operator==(const ExperimentConfig&) const = default;

  /// Throws ConfigError naming the first offending field.
  void validate() const;

  std::string to_json() const;
  /// Strict parse: unknown keys and wrong types are rejected; missing keys keep defaults.
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;

  /// FNV-1a over the canonical JSON of the architecture-defining dims.
  std::uint64_t hash() const;
  /// Same, restricted to the dims that shape the MSFNet parameters.
  std::uint64_t hash_semantic() const;
  /// Same, restricted to the dims that shape the CSI-RS/CSANet parameters.
  std::uint64_t hash_physical() const;

  double noise_var() const;
  nn::TransformerConfig transformer() const;
  /// Encoder/decoder geometry for `in_channels` input planes.
  nn::CodecConfig codec(std::size_t in_channels) const;
};

std::string hex64(std::uint64_t v);

}  // namespace semlink
