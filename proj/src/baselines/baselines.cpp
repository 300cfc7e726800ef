// SPDX-License-Identifier: Apache-2.0
#include "semlink/baselines/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

namespace semlink::base {

namespace {

using Mat = Eigen::MatrixXcd;

Mat matrix_at(const Tensor& t, std::size_t b, std::size_t rows, std::size_t cols) {
  Mat m(rows, cols);
  const auto v = t.storage();
  const std::size_t off = b * rows * cols;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      const std::size_t s = 2 * (off + i * cols + j);
      m(i, j) = cplx(v[s], v[s + 1]);
    }
  return m;
}

Tensor to_tensor(const Mat& m) {
  std::vector<cplx> v(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
  return Tensor::complex({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}, v);
}

// Columns: eigenvectors of a Hermitian matrix by decreasing eigenvalue.
Mat top_eigenvectors(const Mat& R, std::size_t n) {
  if (n > static_cast<std::size_t>(R.rows())) throw DimensionError("more beams requested than antennas");
  Eigen::SelfAdjointEigenSolver<Mat> es(R);
  if (es.info() != Eigen::Success) throw NumericError("eigen-decomposition failed in PCA beamforming");
  Mat out(R.rows(), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) out.col(static_cast<Eigen::Index>(i)) = es.eigenvectors().col(R.rows() - 1 - i);
  return out;
}

Mat phase_only(const Mat& m) {
  Mat out = m;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const cplx z = m.data()[i];
    out.data()[i] = z == cplx(0.0) ? cplx(1.0) : z / std::abs(z);
  }
  return out;
}

void require_batch(const Tensor& H, const char* what) {
  if (!H.is_complex() || H.rank() != 3) {
    throw DimensionError(std::string(what) + " expects complex [batch, N_r, N_t], got " + num::shape_str(H.shape()));
  }
}

}  // namespace

Tensor pca_precoder(const Tensor& H, std::size_t n_rf) {
  require_batch(H, "pca_precoder");
  const std::size_t B = H.dim(0), Nr = H.dim(1), Nt = H.dim(2);
  Mat R = Mat::Zero(Nt, Nt);
  for (std::size_t b = 0; b < B; ++b) {
    const Mat h = matrix_at(H, b, Nr, Nt);
    R.noalias() += h.adjoint() * h;
  }
  return to_tensor(phase_only(top_eigenvectors(R, n_rf)));
}

Tensor pca_combiner(const std::vector<Tensor>& H, std::size_t n_rf) {
  if (H.empty()) throw DimensionError("pca_combiner needs at least one channel batch");
  const std::size_t Nr = H[0].dim(1);
  Mat R = Mat::Zero(Nr, Nr);
  for (const auto& t : H) {
    require_batch(t, "pca_combiner");
    for (std::size_t b = 0; b < t.dim(0); ++b) {
      const Mat h = matrix_at(t, b, Nr, t.dim(2));
      R.noalias() += h * h.adjoint();
    }
  }
  return to_tensor(phase_only(top_eigenvectors(R, n_rf)).adjoint());
}

double array_gain(const Dims& d) {
  return static_cast<double>(d.N_r * d.N_t);
}

double svd_bound_matrix(const std::vector<cplx>& h, std::size_t rows, std::size_t cols, double rho,
                        std::size_t streams, double gain) {
  if (h.size() != rows * cols) throw DimensionError("svd_bound_matrix: storage does not match the shape");
  Mat m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = h[i * cols + j];
  const Eigen::VectorXd s = Eigen::JacobiSVD<Mat>(m).singularValues();
  double eta = 0.0;
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(s.size(), streams); ++i)
    eta += std::log2(1.0 + rho * gain * s(i) * s(i));
  return eta;
}

double svd_bound(const channel::ChannelSet& ch, const Dims& d, double P_t, double sigma2) {
  const double rho = P_t / sigma2, gain = array_gain(d);
  const std::size_t streams = std::min(d.N_RF_r, d.N_RF_t);
  double eta = 0.0;
  for (std::size_t k = 0; k < ch.users(); ++k) {
    const Tensor Hk = phy::data_channels(ch, k, d.L);
    const auto all = Hk.to_complex_vector();
    const std::size_t m = Hk.dim(1) * Hk.dim(2);
    for (std::size_t b = 0; b < Hk.dim(0); ++b) {
      std::vector<cplx> h(all.begin() + b * m, all.begin() + (b + 1) * m);
      eta += svd_bound_matrix(h, Hk.dim(1), Hk.dim(2), rho, streams, gain);
    }
  }
  return eta;
}

Tensor ls_channel_estimate(const Tensor& y_p, const Tensor& pilots, const Tensor& v) {
  const std::size_t Nc = y_p.dim(0), R = y_p.dim(1), L = y_p.dim(2);
  const std::size_t Nr = pilots.dim(2), Nt = v.dim(2);
  if (pilots.dim(0) != L || pilots.dim(1) != Nc || v.dim(0) != L || v.dim(1) != R) {
    throw DimensionError("ls_channel_estimate: pilots " + num::shape_str(pilots.shape()) + " / combiners " +
                         num::shape_str(v.shape()) + " do not match y_p " + num::shape_str(y_p.shape()));
  }
  const auto yv = y_p.to_complex_vector(), pv = pilots.to_complex_vector(), vv = v.to_complex_vector();
  std::vector<cplx> out(Nc * Nr * Nt);
  for (std::size_t n = 0; n < Nc; ++n) {
    // y[r, l] = sum_{a,t} p[l, n, a] v[l, r, t] H[a, t]
    Mat A(static_cast<Eigen::Index>(R * L), static_cast<Eigen::Index>(Nr * Nt));
    Eigen::VectorXcd b(static_cast<Eigen::Index>(R * L));
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t r = 0; r < R; ++r) {
        const auto row = static_cast<Eigen::Index>(l * R + r);
        b(row) = yv[(n * R + r) * L + l];
        for (std::size_t a = 0; a < Nr; ++a)
          for (std::size_t t = 0; t < Nt; ++t)
            A(row, static_cast<Eigen::Index>(a * Nt + t)) = pv[(l * Nc + n) * Nr + a] * vv[(l * R + r) * Nt + t];
      }
    const Eigen::VectorXcd h = A.completeOrthogonalDecomposition().solve(b);
    for (std::size_t i = 0; i < Nr * Nt; ++i) out[n * Nr * Nt + i] = h(static_cast<Eigen::Index>(i));
  }
  return Tensor::complex({Nc, Nr, Nt}, out);
}

Beamformers estimated_pca(const phy::CsiRsNet& pilots, const channel::ChannelSet& ch, const Dims& d, double P_t,
                          double sigma2, num::Rng& noise) {
  num::NoGradGuard guard;
  const auto y = pilots.receive(ch, P_t, sigma2, noise);
  const Tensor p = pilots.pilots(P_t);
  const Tensor v = pilots.v_rf();
  Beamformers bf;
  std::vector<Tensor> est;
  for (std::size_t k = 0; k < d.K; ++k) {
    const Tensor vk = num::reshape(num::slice(v, 0, k, 1), {d.L, d.N_RF_t, d.N_t});
    est.push_back(ls_channel_estimate(y[k], p, vk));
    bf.F.push_back(pca_precoder(est.back(), d.N_RF_t));
  }
  bf.W = pca_combiner(est, d.N_RF_r);
  return bf;
}

Beamformers perfect_pca(const channel::ChannelSet& ch, const Dims& d) {
  Beamformers bf;
  std::vector<Tensor> hs;
  for (std::size_t k = 0; k < ch.users(); ++k) {
    hs.push_back(phy::data_channels(ch, k, d.L));
    bf.F.push_back(pca_precoder(hs.back(), d.N_RF_t));
  }
  bf.W = pca_combiner(hs, d.N_RF_r);
  return bf;
}

Beamformers random_beamformers(const Dims& d, num::Rng& rng) {
  Beamformers bf;
  for (std::size_t k = 0; k < d.K; ++k) bf.F.push_back(phy::random_phase_matrix(d.N_t, d.N_RF_t, rng));
  bf.W = phy::random_phase_matrix(d.N_RF_r, d.N_r, rng);
  return bf;
}

std::vector<Share> orthogonal_shares(std::size_t Q, std::size_t N_c, std::size_t users) {
  if (users != 2) throw ConfigError("orthogonal resource split supports exactly 2 users");
  if (Q % 2 == 0) return {{0, Q / 2, 0, N_c}, {Q / 2, Q / 2, 0, N_c}};
  if (N_c % 2 != 0) throw ConfigError("orthogonal split needs an even Q or an even N_c");
  return {{0, Q, 0, N_c / 2}, {0, Q, N_c / 2, N_c / 2}};
}

Tensor share_channel(const channel::ChannelSet& ch, std::size_t k, std::size_t L, const Share& s) {
  Tensor h = num::slice(num::slice(num::slice(ch.H, 0, k, 1), 1, L + s.q0, s.symbols), 2, s.n0, s.subcarriers);
  return num::reshape(h, {s.count(), ch.n_r(), ch.n_t()});
}

Tensor transmit_orthogonal(const std::vector<Tensor>& s_bb, const std::vector<Tensor>& F, const Tensor& W,
                           const channel::ChannelSet& ch, std::size_t L, const std::vector<Share>& shares,
                           double sigma2, num::Rng& noise) {
  if (s_bb.size() != shares.size() || F.size() != shares.size()) {
    throw DimensionError("transmit_orthogonal needs one feature, precoder and share per user");
  }
  std::vector<Tensor> parts;
  for (std::size_t k = 0; k < shares.size(); ++k) {
    const Share& s = shares[k];
    const std::size_t n_rf = F[k].dim(1);
    if (s_bb[k].numel() != s.count() * n_rf) {
      throw DimensionError("user " + std::to_string(k) + " feature " + num::shape_str(s_bb[k].shape()) +
                           " does not fill its share");
    }
    Tensor x = num::reshape(num::matmul(num::reshape(s_bb[k], {s.count(), n_rf}), num::transpose(F[k])),
                            {s.count(), ch.n_t(), 1});
    Tensor y = channel::add_awgn(num::matmul(share_channel(ch, k, L, s), x), sigma2, noise);
    parts.push_back(num::reshape(num::matmul(W, y), {s.count(), W.dim(0)}));
  }
  return num::concat(parts, 0);
}

DmrsGrid DmrsGrid::make(std::size_t symbols, std::size_t subcarriers, std::size_t streams) {
  if (symbols == 0 || subcarriers == 0 || streams == 0) throw ConfigError("empty DMRS grid");
  DmrsGrid g{symbols, subcarriers, streams, {}};
  g.stream.assign(symbols * subcarriers, -1);
  for (std::size_t r = 0; r < g.res(); r += 4) g.stream[r] = static_cast<int>((r / 4) % streams);
  return g;
}

std::size_t DmrsGrid::pilot_count() const {
  return static_cast<std::size_t>(std::count_if(stream.begin(), stream.end(), [](int s) { return s >= 0; }));
}

std::vector<cplx> dmrs_symbols(const DmrsGrid& grid, num::Rng& rng) {
  std::vector<cplx> x(grid.res(), 0.0);
  for (std::size_t r = 0; r < grid.res(); ++r) {
    if (grid.stream[r] < 0) continue;
    const auto m = rng.uniform_int(0, 3);
    x[r] = std::polar(1.0, std::numbers::pi / 4.0 * static_cast<double>(2 * m + 1));
  }
  return x;
}

namespace {

// Linear interpolation of (pos, value) samples at x; constant beyond the ends.
cplx interp1(const std::vector<std::pair<double, cplx>>& pts, double x) {
  if (x <= pts.front().first) return pts.front().second;
  if (x >= pts.back().first) return pts.back().second;
  auto hi = std::lower_bound(pts.begin(), pts.end(), x, [](const auto& p, double v) { return p.first < v; });
  auto lo = hi - 1;
  const double t = (x - lo->first) / (hi->first - lo->first);
  return (1.0 - t) * lo->second + t * hi->second;
}

}  // namespace

Tensor dmrs_estimate(const Tensor& y, const DmrsGrid& g, const std::vector<cplx>& pilots) {
  if (y.rank() != 2 || y.dim(0) != g.res() || pilots.size() != g.res()) {
    throw DimensionError("dmrs_estimate: received " + num::shape_str(y.shape()) + " does not match the grid");
  }
  const std::size_t R = y.dim(1), S = g.streams;
  const auto yv = y.to_complex_vector();
  std::vector<cplx> out(g.res() * R * S);
  for (std::size_t j = 0; j < S; ++j) {
    // symbol -> pilot samples of stream j along frequency
    std::vector<std::vector<std::pair<double, std::size_t>>> by_symbol(g.symbols);
    for (std::size_t r = 0; r < g.res(); ++r)
      if (g.stream[r] == static_cast<int>(j)) by_symbol[r / g.subcarriers].push_back({double(r % g.subcarriers), r});
    std::vector<std::size_t> sym;
    for (std::size_t q = 0; q < g.symbols; ++q)
      if (!by_symbol[q].empty()) sym.push_back(q);
    if (sym.empty()) throw ConfigError("DMRS grid has no pilot for stream " + std::to_string(j));
    for (std::size_t a = 0; a < R; ++a) {
      // per pilot symbol: frequency interpolation, then linear in time
      std::vector<std::vector<cplx>> freq(g.symbols);
      for (std::size_t q : sym) {
        std::vector<std::pair<double, cplx>> pts;
        for (auto [n, r] : by_symbol[q]) pts.push_back({n, yv[r * R + a] * std::conj(pilots[r]) / std::norm(pilots[r])});
        freq[q].resize(g.subcarriers);
        for (std::size_t n = 0; n < g.subcarriers; ++n) freq[q][n] = interp1(pts, double(n));
      }
      for (std::size_t n = 0; n < g.subcarriers; ++n) {
        std::vector<std::pair<double, cplx>> pts;
        for (std::size_t q : sym) pts.push_back({double(q), freq[q][n]});
        for (std::size_t q = 0; q < g.symbols; ++q)
          out[((q * g.subcarriers + n) * R + a) * S + j] = interp1(pts, double(q));
      }
    }
  }
  return Tensor::complex({g.res(), R, S}, out);
}

Tensor zf_detect(const Tensor& h, const Tensor& y) {
  const std::size_t n = h.dim(0), R = h.dim(1), S = h.dim(2);
  if (y.rank() != 2 || y.dim(0) != n || y.dim(1) != R) {
    throw DimensionError("zf_detect: y " + num::shape_str(y.shape()) + " vs h " + num::shape_str(h.shape()));
  }
  const auto yv = y.to_complex_vector();
  std::vector<cplx> out(n * S);
  for (std::size_t i = 0; i < n; ++i) {
    const Mat H = matrix_at(h, i, R, S);
    Eigen::VectorXcd yi(static_cast<Eigen::Index>(R));
    for (std::size_t a = 0; a < R; ++a) yi(static_cast<Eigen::Index>(a)) = yv[i * R + a];
    Mat G = H.adjoint() * H;
    const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Mat>(G, Eigen::EigenvaluesOnly).eigenvalues();
    if (ev.size() == 0 || ev(0) <= 1e-12 * std::max(ev(ev.size() - 1), 1e-300)) {
      G += 1e-6 * Mat::Identity(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(S));
    }
    const Eigen::VectorXcd s = G.ldlt().solve(H.adjoint() * yi);
    for (std::size_t j = 0; j < S; ++j) out[i * S + j] = s(static_cast<Eigen::Index>(j));
  }
  return Tensor::complex({n, S}, out);
}

DmrsLink dmrs_chain(const Tensor& s, const Tensor& F, const Tensor& W, const Tensor& H_share, const DmrsGrid& g,
                    double P_t, double sigma2, num::Rng& rng) {
  num::NoGradGuard guard;
  const std::size_t S = F.dim(1), Nt = F.dim(0), Nr = H_share.dim(1), R = W.dim(0);
  if (s.rank() != 2 || s.dim(0) != g.data_count() || s.dim(1) != S) {
    throw DimensionError("dmrs_chain: data " + num::shape_str(s.shape()) + " does not fill the " +
                         std::to_string(g.data_count()) + " data REs");
  }
  if (H_share.dim(0) != g.res() || H_share.dim(2) != Nt) {
    throw DimensionError("dmrs_chain: channel " + num::shape_str(H_share.shape()) + " does not match the grid");
  }
  const Tensor sn = sem::UeMsfNet::normalize(s, F, P_t);
  const auto sv = sn.to_complex_vector();
  const auto fv = F.to_complex_vector();
  std::vector<cplx> pil = dmrs_symbols(g, rng);
  // scale each pilot so its transmit power equals P_t
  std::vector<double> col_norm(S, 0.0);
  for (std::size_t t = 0; t < Nt; ++t)
    for (std::size_t j = 0; j < S; ++j) col_norm[j] += std::norm(fv[t * S + j]);
  std::vector<cplx> x(g.res() * S, 0.0);
  std::size_t di = 0;
  for (std::size_t r = 0; r < g.res(); ++r) {
    const int j = g.stream[r];
    if (j >= 0) {
      pil[r] *= std::sqrt(P_t / col_norm[j]);
      x[r * S + j] = pil[r];
    } else {
      for (std::size_t c = 0; c < S; ++c) x[r * S + c] = sv[di * S + c];
      ++di;
    }
  }
  const Tensor xt = num::reshape(num::matmul(Tensor::complex({g.res(), S}, x), num::transpose(F)), {g.res(), Nt, 1});
  const Tensor y = num::reshape(num::matmul(W, channel::add_awgn(num::matmul(H_share, xt), sigma2, rng)),
                                {g.res(), R});
  DmrsLink out;
  out.h_est = dmrs_estimate(y, g, pil);
  out.h_true = num::matmul(num::matmul(W, H_share), F);
  (void)Nr;
  std::vector<std::size_t> data_re;
  for (std::size_t r = 0; r < g.res(); ++r)
    if (g.stream[r] < 0) data_re.push_back(r);
  const auto hv = out.h_est.to_complex_vector(), yv = y.to_complex_vector();
  std::vector<cplx> hd(data_re.size() * R * S), yd(data_re.size() * R);
  for (std::size_t i = 0; i < data_re.size(); ++i) {
    std::copy_n(hv.begin() + data_re[i] * R * S, R * S, hd.begin() + i * R * S);
    std::copy_n(yv.begin() + data_re[i] * R, R, yd.begin() + i * R);
  }
  out.s_hat = zf_detect(Tensor::complex({data_re.size(), R, S}, hd), Tensor::complex({data_re.size(), R}, yd));
  // undo the transmit power scaling so s_hat estimates s itself
  const double gain = sn.storage().empty() ? 1.0 : num::frobenius_norm(sn).item() / num::frobenius_norm(s).item();
  out.s_hat = num::scale(out.s_hat, 1.0 / gain);
  return out;
}

Tensor straight_through(const Tensor& x, const Tensor& value) {
  if (x.shape() != value.shape() || x.dtype() != value.dtype()) {
    throw DimensionError("straight_through: value " + num::shape_str(value.shape()) + " vs " +
                         num::shape_str(x.shape()));
  }
  std::vector<double> delta = value.to_vector();
  const auto xv = x.storage();
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= xv[i];
  return num::add(x, Tensor::from_storage(x.shape(), x.dtype(), std::move(delta)));
}

BaselineNet::BaselineNet(const ExperimentConfig& cfg, num::Rng& init) {
  const Dims& d = cfg.dims;
  shares = orthogonal_shares(d.Q, d.N_c, d.K);
  std::size_t received = 0;
  for (std::size_t k = 0; k < d.K; ++k) {
    grids.push_back(DmrsGrid::make(shares[k].symbols, shares[k].subcarriers, d.N_RF_t));
    const sem::Grid g{1, grids.back().data_count()};
    ue.emplace_back(params, "base_ue" + std::to_string(k), d, k == 0 ? 3 : 1, g, init);
    received += g.count() * d.N_RF_t;
  }
  bs = sem::BsMsfNet(params, "base_bs", d, received, init);
  num::Rng sounding_rng = init.split("sounding");
  sounding = phy::CsiRsNet(sounding_params, d, sounding_rng);
}

}  // namespace semlink::base
