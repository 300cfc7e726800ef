// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "semlink/baselines/baselines.hpp"
#include "semlink/config.hpp"
#include "semlink/phynet/phynet.hpp"
#include "semlink/semnet/dataset.hpp"
#include "semlink/semnet/semnet.hpp"

namespace semlink::train {

using num::Tensor;

/// Transmission scheme of a run.
enum class Variant { superposed, orthogonal, dmrs_baseline };
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// Independent random streams derived from the master seed.
struct Streams {
  explicit Streams(std::uint64_t seed);
  num::Rng init, data, channel, link, noise, shuffle;
};

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MetricsRow {
  int stage = 0;
  std::size_t epoch = 0;
  double loss = kNaN, miou = kNaN, eta = kNaN;
  std::uint64_t seed = 0;
  double wallclock_s = 0.0;
};

/// Append-only per-epoch log, written as CSV.
class MetricsLog {
 public:
  static constexpr const char* kHeader = "stage,epoch,loss,miou,eta,seed,wallclock_s";

  void append(const MetricsRow& row) { rows_.push_back(row); }
  const std::vector<MetricsRow>& rows() const { return rows_; }
  std::string to_csv() const;
  void write(const std::string& path) const;

 private:
  std::vector<MetricsRow> rows_;
};

struct CheckpointInfo {
  std::uint64_t config_hash = 0;
  int stage = 0;
  std::size_t epoch = 0;
  std::string variant;
  double metric = kNaN;
};

/// Directory with manifest.json and one raw float64 file per parameter.
void save_checkpoint(const std::string& dir, const std::vector<const nn::ParamList*>& lists,
                     const CheckpointInfo& info);
CheckpointInfo read_checkpoint_info(const std::string& dir);
/// Fills every parameter of `lists` from the checkpoint. Throws IoError when
/// the directory or a file is missing and ConfigError on a hash, variant,
/// name or shape mismatch.
CheckpointInfo load_checkpoint(const std::string& dir, const std::vector<nn::ParamList*>& lists,
                               std::uint64_t expected_hash, const std::string& expected_variant);

/// Every network of one run.
class System {
 public:
  System(const ExperimentConfig& cfg, Variant variant);

  const ExperimentConfig& config() const { return cfg_; }
  Variant variant() const { return variant_; }
  std::uint64_t seed() const { return cfg_.training.seed; }

  ExperimentConfig cfg_;
  Variant variant_;
  Streams streams;
  num::Rng init_phy, init_sem, init_base;
  phy::PhyNet phy;
  sem::SemNet sem;
  std::unique_ptr<base::BaselineNet> baseline;
  std::vector<base::Share> shares;  ///< orthogonal variants only
  /// User whose image is replaced by a flat background (-1: none), for
  /// single-modality ablations.
  int blank_user = -1;
};

struct Forward {
  Tensor logits;
  double eta = kNaN;
};

/// Stage-1 path: noiseless identity channel and zero channel features.
Forward forward_identity(const System& sys, const sem::SourceSample& s);
/// Full link over `ch`.
Forward forward_link(const System& sys, const sem::SourceSample& s, const channel::ChannelSet& ch, num::Rng& noise);

/// Channel for dataset sample `index` (stage 3 and evaluation).
channel::ChannelSet link_channel(const System& sys, std::size_t index);
/// Channel `index` of the stage-2 channel dataset.
channel::ChannelSet dataset_channel(const System& sys, std::size_t index);

enum class Path { identity, link };

struct EvalResult {
  double miou = kNaN, pixel_accuracy = kNaN, eta = kNaN;
  std::vector<double> class_iou;
  std::size_t samples = 0;
};

/// Segmentation metrics over a dataset split (max_samples = 0: all). No
/// parameter is touched and the noise draws are fixed, so repeated calls agree.
EvalResult evaluate(const System& sys, sem::Split split, Path path, std::size_t max_samples = 0);

/// Mean η of the learned beamformers over a split of the channel dataset.
double evaluate_eta(const System& sys, sem::Split split, std::size_t max_channels = 0);

struct StageResult {
  double best_metric = kNaN;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

/// Each stage logs one row per epoch, writes its best checkpoint to
/// `ckpt_dir` (if non-empty) and leaves the best parameters in `sys`.
StageResult train_stage1(System& sys, MetricsLog& log, const std::string& ckpt_dir);
StageResult train_stage2(System& sys, MetricsLog& log, const std::string& ckpt_dir);
/// Logs the initial validation metrics as epoch 0.
StageResult train_stage3(System& sys, MetricsLog& log, const std::string& ckpt_dir);
/// Trains the DMRS reference codec through the separated chain for
/// stage1.epochs + stage3.epochs epochs (logged as stage 4).
StageResult train_baseline(System& sys, MetricsLog& log, const std::string& ckpt_dir);

/// Loads the stage-1 and stage-2 checkpoints before joint training; refuses
/// with UsageError naming the missing stage, or ConfigError on a mismatch.
void prepare_stage3(System& sys, const std::string& stage1_dir, const std::string& stage2_dir);

/// Parameter lists saved for a stage of a variant.
std::vector<const nn::ParamList*> stage_params(const System& sys, int stage);
std::vector<nn::ParamList*> stage_params(System& sys, int stage);
/// Architecture hash a checkpoint of `stage` is tied to.
std::uint64_t stage_hash(const ExperimentConfig& cfg, int stage);

}  // namespace semlink::train
