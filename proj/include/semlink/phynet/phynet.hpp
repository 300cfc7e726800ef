// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "semlink/channel/channel.hpp"
#include "semlink/config.hpp"
#include "semlink/nn/blocks.hpp"

namespace semlink::phy {

using num::Tensor;

/// Learnable CSI-RS: baseband pilots x_BB [L, N_c, N_RF_r] (stored as a real
/// [.., 2] pair), BS analog phases P_RF [L, N_r, N_RF_r] and per-user UE
/// combining phases Q_RF [K, L, N_RF_t, N_t].
class CsiRsNet {
 public:
  CsiRsNet() = default;
  CsiRsNet(nn::ParamList& params, const Dims& dims, num::Rng& rng);

  /// X_RF = exp(j P_RF): [L, N_r, N_RF_r].
  Tensor x_rf() const;
  /// V_RF = exp(j Q_RF): [K, L, N_RF_t, N_t].
  Tensor v_rf() const;
  /// Transmitted pilot vectors X_RF[l] x_BB[l, n], power-normalized to P_t: [L, N_c, N_r].
  Tensor pilots(double P_t) const;

  /// Received CSI-RS of every user, each [N_c, N_RF_t, L]. H^T of the
  /// first L symbols carries the downlink pilots (TDD reciprocity).
  std::vector<Tensor> receive(const channel::ChannelSet& ch, double P_t, double sigma2, num::Rng& noise) const;

  Tensor x_bb, p_rf, q_rf;

 private:
  Dims dims_;
};

struct UeCsaOutput {
  Tensor bits;   ///< [B] in {0,1}
  Tensor F;      ///< complex [N_t, N_RF_t], unit modulus
  Tensor theta;  ///< real [N_t, N_RF_t]
  Tensor s_csi;  ///< [N_c, d_CSI]
};

/// UE-side channel semantic extraction, feedback and precoder generation.
class UeCsaNet {
 public:
  UeCsaNet() = default;
  UeCsaNet(nn::ParamList& params, const Dims& dims, num::Rng& rng);
  UeCsaOutput operator()(const Tensor& y_p) const;

  /// Emit the sigmoid codeword instead of hard bits. The backward pass is
  /// the same as the straight-through quantizer's, but the forward is
  /// smooth, so finite differences can verify the feedback path.
  bool relaxed_bits = false;

 private:
  Dims dims_;
  nn::Linear embed_, to_csi_, a_in_, a_out_, b_in_, b_out_;
  nn::TransformerStack trunk_, branch_a_, branch_b_;
};

struct BsCsaOutput {
  Tensor W;      ///< complex [N_RF_r, N_r], unit modulus
  Tensor phi;    ///< real [N_RF_r, N_r]
  Tensor s_csi;  ///< [N_c, d_CSI]
};

/// BS-side dequantization, channel semantic extraction and combiner generation.
class BsCsaNet {
 public:
  BsCsaNet() = default;
  BsCsaNet(nn::ParamList& params, const Dims& dims, num::Rng& rng);
  /// `bits`: one [B] vector per user.
  BsCsaOutput operator()(const std::vector<Tensor>& bits) const;

 private:
  Dims dims_;
  nn::Linear embed_, to_csi_, c_in_, c_out_;
  nn::TransformerStack trunk_, branch_;
};

/// W H F for every matrix of H [batch, N_r, N_t]: [batch, N_RF_r, N_RF_t].
Tensor effective_channel(const Tensor& W, const Tensor& H, const Tensor& F);

/// Data symbols q = L+1..L+Q of user k as a [Q*N_c, N_r, N_t] tensor.
Tensor data_channels(const channel::ChannelSet& ch, std::size_t k, std::size_t L);

/// sum_{k, data q, n} log2 det(I + (P_t / sigma2) M M^H), M = W H[k,q,n] F[k].
Tensor spectral_efficiency(const Tensor& W, const std::vector<Tensor>& F, const channel::ChannelSet& ch,
                           std::size_t L, double P_t, double sigma2);

struct PhyOutput {
  std::vector<Tensor> y_p;
  std::vector<UeCsaOutput> ue;
  BsCsaOutput bs;
  std::vector<Tensor> F() const;
  std::vector<Tensor> s_csi_ue() const;
};

/// BS-CSIRS-Net + UE-CSANet (shared across users) + BS-CSANet.
class PhyNet {
 public:
  PhyNet(const ExperimentConfig& cfg, num::Rng& init);

  PhyOutput operator()(const channel::ChannelSet& ch, double sigma2, num::Rng& noise) const;

  nn::ParamList params;
  CsiRsNet csirs;
  UeCsaNet ue;
  BsCsaNet bs;

 private:
  ExperimentConfig cfg_;
};

/// Unit-modulus matrix with i.i.d. uniform phases.
Tensor random_phase_matrix(std::size_t rows, std::size_t cols, num::Rng& rng);

}  // namespace semlink::phy
