// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "semlink/channel/channel.hpp"
#include "semlink/config.hpp"
#include "semlink/phynet/phynet.hpp"
#include "semlink/semnet/semnet.hpp"

namespace semlink::base {

using num::cplx;
using num::Tensor;

// ---- analog beamforming --------------------------------------------------

/// exp(j angle(.)) of the top `n_rf` eigenvectors of sum_b H_b^H H_b.
/// H: complex [batch, N_r, N_t]; returns [N_t, n_rf].
Tensor pca_precoder(const Tensor& H, std::size_t n_rf);
/// Combiner rows exp(-j angle(u_i)) for the top eigenvectors u_i of
/// sum_{k,b} H H^H; returns [n_rf, N_r].
Tensor pca_combiner(const std::vector<Tensor>& H, std::size_t n_rf);

/// Per-stream power gain of a unit-modulus combiner row and precoder column,
/// |w|^2 |f|^2 = N_r N_t. η leaves W and F unnormalized, so the digital
/// reference carries the same factor.
double array_gain(const Dims& d);

/// sum_i log2(1 + rho * gain * s_i^2) over the top `streams` singular values of
/// one [rows, cols] row-major matrix.
double svd_bound_matrix(const std::vector<cplx>& h, std::size_t rows, std::size_t cols, double rho,
                        std::size_t streams, double gain = 1.0);
/// Sum of svd_bound_matrix over users and data REs, with the array gain of `d`.
double svd_bound(const channel::ChannelSet& ch, const Dims& d, double P_t, double sigma2);

/// Minimum-norm least-squares channel from received CSI-RS y_p [N_c, N_RF_t, L],
/// transmitted pilots [L, N_c, N_r] and UE combiners v [L, N_RF_t, N_t].
/// Returns [N_c, N_r, N_t], assuming the channel is constant over the L symbols.
Tensor ls_channel_estimate(const Tensor& y_p, const Tensor& pilots, const Tensor& v);

struct Beamformers {
  std::vector<Tensor> F;  ///< per user [N_t, N_RF_t]
  Tensor W;               ///< [N_RF_r, N_r]
};

/// PCA beamformers from LS estimates of the CSI-RS symbols; `pilots` holds
/// the (fixed) sounding design.
Beamformers estimated_pca(const phy::CsiRsNet& pilots, const channel::ChannelSet& ch, const Dims& d, double P_t,
                          double sigma2, num::Rng& noise);
/// PCA beamformers from the true data-symbol channels.
Beamformers perfect_pca(const channel::ChannelSet& ch, const Dims& d);
Beamformers random_beamformers(const Dims& d, num::Rng& rng);

// ---- orthogonal resources ----------------------------------------------------

/// Rectangular block of the data grid owned by one user.
struct Share {
  std::size_t q0 = 0, symbols = 0, n0 = 0, subcarriers = 0;
  std::size_t count() const { return symbols * subcarriers; }
};

/// Two users split the Q x N_c grid: time halves when Q is even, otherwise
/// subcarrier halves.
std::vector<Share> orthogonal_shares(std::size_t Q, std::size_t N_c, std::size_t users);

/// Channel of user k over its share, [count, N_r, N_t], data symbols start at L.
Tensor share_channel(const channel::ChannelSet& ch, std::size_t k, std::size_t L, const Share& share);

/// Each user transmits its S_BB [symbols, subcarriers, N_RF_t] only on its own
/// share; the per-user received features W(H F s + n) are concatenated into
/// [sum of counts, N_RF_r].
Tensor transmit_orthogonal(const std::vector<Tensor>& s_bb, const std::vector<Tensor>& F, const Tensor& W,
                           const channel::ChannelSet& ch, std::size_t L, const std::vector<Share>& shares,
                           double sigma2, num::Rng& noise);

// ---- DMRS chain ------------------------------------------------------------------

/// Every 4th RE (row-major over the share) carries DMRS, streams take turns.
struct DmrsGrid {
  std::size_t symbols = 0, subcarriers = 0, streams = 0;
  std::vector<int> stream;  ///< per RE: pilot stream index, -1 for data

  static DmrsGrid make(std::size_t symbols, std::size_t subcarriers, std::size_t streams);
  std::size_t res() const { return symbols * subcarriers; }
  std::size_t pilot_count() const;
  std::size_t data_count() const { return res() - pilot_count(); }
};

/// Unit-modulus QPSK pilot per DMRS RE (zero at data REs).
std::vector<cplx> dmrs_symbols(const DmrsGrid& grid, num::Rng& rng);

/// Per-RE equivalent-channel estimate from DMRS observations: LS at pilot REs
/// (y x^* / |x|^2, one stream column per RE), then bilinear interpolation of
/// each stream column over (q, n). y: [res, N_RF_r]; returns [res, N_RF_r, streams].
Tensor dmrs_estimate(const Tensor& y, const DmrsGrid& grid, const std::vector<cplx>& pilots);

/// ZF detection s = (H^H H)^{-1} H^H y per RE, falling back to a 1e-6 ridge
/// when H is near singular. h: [n, R, S], y: [n, R] -> [n, S].
Tensor zf_detect(const Tensor& h, const Tensor& y);

struct DmrsLink {
  Tensor s_hat;      ///< [data REs, N_RF_t]
  Tensor h_est;      ///< [res, N_RF_r, N_RF_t]
  Tensor h_true;     ///< [res, N_RF_r, N_RF_t] = W H F
};

/// One user's DMRS-aided link over its share: data s [data REs, N_RF_t] is
/// power-normalized to P_t per RE, pilots inserted, sent through
/// H_share [res, N_r, N_t], combined, estimated and ZF-equalized.
DmrsLink dmrs_chain(const Tensor& s, const Tensor& F, const Tensor& W, const Tensor& H_share, const DmrsGrid& grid,
                    double P_t, double sigma2, num::Rng& rng);

/// Forward value `value`, backward identity to `x` (straight-through).
Tensor straight_through(const Tensor& x, const Tensor& value);

/// Separated-design reference: per-user source codec over the data REs of its
/// orthogonal share and a fusion decoder on the equalized streams.
class BaselineNet {
 public:
  BaselineNet(const ExperimentConfig& cfg, num::Rng& init);

  nn::ParamList params;
  std::vector<sem::UeMsfNet> ue;
  sem::BsMsfNet bs;
  std::vector<Share> shares;
  std::vector<DmrsGrid> grids;
  phy::CsiRsNet sounding;  ///< fixed random-phase CSI-RS design, not trained
  nn::ParamList sounding_params;
};

}  // namespace semlink::base
