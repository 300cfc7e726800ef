// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semlink/channel/channel.hpp"
#include "semlink/config.hpp"
#include "semlink/nn/blocks.hpp"

namespace semlink::sem {

using num::Tensor;

/// Semantic fusion attention: channel gates predicted from the pooled source
/// feature concatenated with an embedding of the channel semantic feature.
class Sfa {
 public:
  Sfa() = default;
  Sfa(nn::ParamList& params, const std::string& name, std::size_t d_s, std::size_t csi_len, std::size_t d_c,
      num::Rng& rng);
  /// f_s [d_s, H_s, W_s], f_csi [N_c, d_CSI]; `gates` optionally receives G [d_s].
  Tensor operator()(const Tensor& f_s, const Tensor& f_csi, Tensor* gates = nullptr) const;

  nn::Linear fc_csi, w1, w2;

 private:
  std::size_t d_s_ = 0;
};

/// Resource grid a user occupies: `symbols` x `subcarriers` REs.
struct Grid {
  std::size_t symbols = 0, subcarriers = 0;
  std::size_t count() const { return symbols * subcarriers; }
};

/// Source encoder + SFA + implicit-DMRS mapping to S_BB [symbols, subcarriers, N_RF_t].
class UeMsfNet {
 public:
  UeMsfNet() = default;
  UeMsfNet(nn::ParamList& params, const std::string& name, const Dims& dims, std::size_t in_channels, Grid grid,
           num::Rng& rng);

  /// S_BB scaled so that ||F S_BB||_F^2 = P_t * grid.count(). An undefined
  /// `F` stands for the identity (stage-1 pretraining).
  Tensor operator()(const Tensor& image, const Tensor& s_csi, const Tensor& F, double P_t) const;

  /// The pre-normalization mapping, shared with the baseline codec.
  Tensor raw_features(const Tensor& image, const Tensor& s_csi) const;

  /// Unit-power normalization; throws NumericError on an all-zero output.
  static Tensor normalize(const Tensor& s_bb, const Tensor& F, double P_t);

  Grid grid() const { return grid_; }

 private:
  Dims dims_;
  Grid grid_;
  nn::ConvEncoder encoder_;
  Sfa sfa_;
  nn::Linear map_;
};

/// Received-feature fusion and decoding to class logits [C, H, W].
class BsMsfNet {
 public:
  BsMsfNet() = default;
  /// `received` is the number of complex received entries (REs x N_RF_r).
  BsMsfNet(nn::ParamList& params, const std::string& name, const Dims& dims, std::size_t received, num::Rng& rng);
  /// y_bb: any complex tensor holding `received` entries.
  Tensor operator()(const Tensor& y_bb, const Tensor& s_csi) const;

 private:
  Dims dims_;
  std::size_t received_ = 0;
  nn::Linear map_;
  Sfa sfa_;
  nn::ConvDecoder decoder_;
};

/// Normalizes a complex tensor to unit mean-square amplitude (receiver AGC).
Tensor agc(const Tensor& y);

/// y[q, n] = sum_k H[k, L+q, n] F[k] s_k[q, n] + noise; Y_BB[q, n] = W y[q, n].
/// s_bb: per user [Q, N_c, N_RF_t]; returns [Q, N_c, N_RF_r].
Tensor transmit_superpose(const std::vector<Tensor>& s_bb, const std::vector<Tensor>& F, const Tensor& W,
                          const channel::ChannelSet& ch, std::size_t L, double sigma2, num::Rng& noise);

/// Noiseless identity equivalent channel: Y_BB = sum_k S_BB[k].
Tensor identity_superpose(const std::vector<Tensor>& s_bb);

/// Pixel-mean cross entropy.
Tensor seg_loss(const Tensor& logits, std::span<const std::int32_t> label);

/// Argmax class per pixel of logits [C, H, W].
std::vector<std::int32_t> predict(const Tensor& logits);

/// Per-class intersection / union tallies.
struct IouCounts {
  std::vector<std::uint64_t> inter, uni;
  std::uint64_t correct = 0, total = 0;

  explicit IouCounts(std::size_t classes = 0) : inter(classes, 0), uni(classes, 0) {}
  void add(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth);
  /// Mean IoU over classes with a non-empty union (1.0 if none).
  double miou() const;
  double pixel_accuracy() const;
  /// IoU of one class, NaN when its union is empty.
  double iou(std::size_t c) const;
};

double miou(const Tensor& logits, std::span<const std::int32_t> label);

/// UE-MSFNet per user (user 0 sees modality A, user 1 modality B) and BS-MSFNet.
class SemNet {
 public:
  /// `grids` gives each user's transmit block; empty means the full Q x N_c
  /// grid for every user (non-orthogonal superposition).
  SemNet(const ExperimentConfig& cfg, num::Rng& init, std::vector<Grid> grids = {});

  nn::ParamList params;
  std::vector<UeMsfNet> ue;
  BsMsfNet bs;
};

}  // namespace semlink::sem
