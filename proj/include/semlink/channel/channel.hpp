// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "semlink/config.hpp"
#include "semlink/numcore/rng.hpp"
#include "semlink/numcore/tensor.hpp"

namespace semlink::channel {

using num::cplx;
using num::Tensor;

inline constexpr double kSpeedOfLight = 299792458.0;

struct OfdmConfig {
  std::size_t N_c = 16;
  std::size_t N_cp = 4;
  double delta_f = 120e3;
  double f_c = 28e9;
  double T_s = 0.0;  ///< 1 / (N_c delta_f)
  double T_I = 0.0;  ///< (N_c + N_cp) T_s

  static OfdmConfig make(std::size_t N_c, double delta_f, double f_c);
};

struct PathParams {
  std::size_t L_p_min = 3, L_p_max = 6;
  double tau_max = 0.0;  ///< seconds
  double v_max = 0.0;    ///< m/s
  double f_c = 28e9;

  static PathParams from(const ExperimentConfig& cfg, const OfdmConfig& ofdm);
};

struct Path {
  cplx alpha;
  double theta_t = 0.0, theta_r = 0.0;
  double tau = 0.0;  ///< seconds
  double f_d = 0.0;  ///< Hz
};

/// Per-user multipath parameters.
struct PathSet {
  std::vector<std::vector<Path>> users;
};

/// H[k, q, n] for every user, OFDM symbol (CSI-RS then data) and subcarrier.
struct ChannelSet {
  Tensor H;  ///< complex [K, S, N_c, N_r, N_t], S = L + Q
  double noise_var = 0.0;
  std::uint64_t seed = 0;

  std::size_t users() const { return H.dim(0); }
  std::size_t symbols() const { return H.dim(1); }
  std::size_t subcarriers() const { return H.dim(2); }
  std::size_t n_r() const { return H.dim(3); }
  std::size_t n_t() const { return H.dim(4); }
  /// Copy of one N_r x N_t matrix.
  std::vector<cplx> matrix(std::size_t k, std::size_t q, std::size_t n) const;
};

/// a(theta)_m = exp(j pi m sin theta) / sqrt(N), m = 0..N-1 (half-wavelength ULA).
std::vector<cplx> steering(double theta, std::size_t N);
inline std::vector<cplx> steering_tx(double theta, std::size_t N_t) { return steering(theta, N_t); }
inline std::vector<cplx> steering_rx(double theta, std::size_t N_r) { return steering(theta, N_r); }

PathSet sample_paths(const PathParams& params, std::size_t users, num::Rng& rng);

/// Evaluates the multipath sum for symbols q = 1..symbols (stored at q-1)
/// and subcarriers n = 0..N_c-1.
ChannelSet assemble_channel(const PathSet& paths, const OfdmConfig& ofdm, std::size_t N_r, std::size_t N_t,
                            std::size_t symbols);

/// Adds i.i.d. CN(0, sigma2) noise to a complex tensor (identity for sigma2 = 0).
Tensor add_awgn(const Tensor& signal, double sigma2, num::Rng& rng);

/// One channel drop for `cfg`: paths from `rng`, L + Q symbols.
ChannelSet realize(const ExperimentConfig& cfg, num::Rng& rng);

/// Writes `sets` (all of equal shape) as <stem>.bin + <stem>.json.
void export_channels(const std::string& stem, const std::vector<ChannelSet>& sets, const ExperimentConfig& cfg);
/// Reads a file pair written by export_channels, validating the manifest.
std::vector<ChannelSet> import_channels(const std::string& stem);

}  // namespace semlink::channel
