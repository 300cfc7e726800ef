// SPDX-License-Identifier: Apache-2.0
#include "semlink/phynet/phynet.hpp"

#include <cmath>
#include <numbers>

namespace semlink::phy {

namespace {

constexpr double kPi = std::numbers::pi;

Tensor uniform_phases(nn::ParamList& params, const std::string& name, const num::Shape& shape, num::Rng& rng) {
  return params.add_uniform(name, shape, kPi, rng);
}

}  // namespace

CsiRsNet::CsiRsNet(nn::ParamList& params, const Dims& d, num::Rng& rng) : dims_(d) {
  std::vector<double> pilots(d.L * d.N_c * d.N_RF_r * 2);
  for (auto& v : pilots) v = rng.normal(0.0, std::sqrt(0.5));
  x_bb = params.add("csirs.x_bb", {d.L, d.N_c, d.N_RF_r, 2}, std::move(pilots));
  p_rf = uniform_phases(params, "csirs.p_rf", {d.L, d.N_r, d.N_RF_r}, rng);
  q_rf = uniform_phases(params, "csirs.q_rf", {d.K, d.L, d.N_RF_t, d.N_t}, rng);
}

Tensor CsiRsNet::x_rf() const { return num::complex_exp_phase(p_rf); }

Tensor CsiRsNet::v_rf() const { return num::complex_exp_phase(q_rf); }

Tensor CsiRsNet::pilots(double P_t) const {
  const Dims& d = dims_;
  // [L, N_c, N_RF_r] x [L, N_RF_r, N_r] -> rows are (X_RF[l] x_BB[l, n])^T
  Tensor p = num::matmul(num::as_complex(x_bb), num::transpose(x_rf()));
  Tensor norm = num::sqrt(num::sum(num::abs2(p), {2}));
  Tensor gain = num::scale(num::reciprocal(norm), std::sqrt(P_t));
  return num::mul(p, num::to_complex(num::reshape(gain, {d.L, d.N_c, 1})));
}

std::vector<Tensor> CsiRsNet::receive(const channel::ChannelSet& ch, double P_t, double sigma2,
                                      num::Rng& noise) const {
  const Dims& d = dims_;
  if (ch.users() != d.K || ch.symbols() < d.L || ch.subcarriers() != d.N_c || ch.n_r() != d.N_r ||
      ch.n_t() != d.N_t) {
    throw DimensionError("channel set " + num::shape_str(ch.H.shape()) + " does not match the CSI-RS dims");
  }
  if (!(sigma2 >= 0.0)) throw UsageError("noise variance must be non-negative");
  Tensor p = num::reshape(pilots(P_t), {d.L * d.N_c, 1, d.N_r});
  Tensor v = v_rf();
  std::vector<Tensor> out;
  for (std::size_t k = 0; k < d.K; ++k) {
    Tensor h = num::reshape(num::slice(num::slice(ch.H, 0, k, 1), 1, 0, d.L), {d.L * d.N_c, d.N_r, d.N_t});
    // u[l, n]^T = p[l, n]^T H[k, l, n]  (= (H^T p)^T)
    Tensor u = num::reshape(num::matmul(p, h), {d.L, d.N_c, d.N_t});
    Tensor vk = num::reshape(num::slice(v, 0, k, 1), {d.L, d.N_RF_t, d.N_t});
    Tensor y = num::permute(num::matmul(u, num::transpose(vk)), {1, 2, 0});  // [N_c, N_RF_t, L]
    out.push_back(channel::add_awgn(y, sigma2, noise));
  }
  return out;
}

UeCsaNet::UeCsaNet(nn::ParamList& params, const Dims& d, num::Rng& rng) : dims_(d) {
  const nn::TransformerConfig tc{d.d_model, d.U, d.n_heads, d.d_ff};
  embed_ = nn::Linear(params, "ue_csa.embed", 2 * d.N_RF_t * d.L, d.d_model, rng);
  trunk_ = nn::TransformerStack(params, "ue_csa.trunk", tc, rng);
  to_csi_ = nn::Linear(params, "ue_csa.to_csi", d.d_model, d.d_CSI, rng);
  a_in_ = nn::Linear(params, "ue_csa.precoder.embed", d.d_CSI, d.d_model, rng);
  branch_a_ = nn::TransformerStack(params, "ue_csa.precoder.tf", tc, rng);
  a_out_ = nn::Linear(params, "ue_csa.precoder.head", d.N_c * d.d_model, d.N_t * d.N_RF_t, rng);
  b_in_ = nn::Linear(params, "ue_csa.feedback.embed", d.d_CSI, d.d_model, rng);
  branch_b_ = nn::TransformerStack(params, "ue_csa.feedback.tf", tc, rng);
  b_out_ = nn::Linear(params, "ue_csa.feedback.head", d.N_c * d.d_model, d.B, rng);
}

UeCsaOutput UeCsaNet::operator()(const Tensor& y_p) const {
  const Dims& d = dims_;
  if (y_p.shape() != num::Shape{d.N_c, d.N_RF_t, d.L} || !y_p.is_complex()) {
    throw DimensionError("UE-CSANet expects complex [" + std::to_string(d.N_c) + "x" + std::to_string(d.N_RF_t) +
                         "x" + std::to_string(d.L) + "], got " + num::shape_str(y_p.shape()));
  }
  Tensor seq = num::split_re_im(num::reshape(y_p, {d.N_c, d.N_RF_t * d.L}));
  Tensor s_csi = to_csi_(trunk_(nn::position_embed(embed_(seq))));
  UeCsaOutput out;
  out.s_csi = s_csi;
  out.theta = num::reshape(a_out_(num::flatten(branch_a_(a_in_(s_csi)))), {d.N_t, d.N_RF_t});
  out.F = num::complex_exp_phase(out.theta);
  Tensor c = num::sigmoid(b_out_(num::flatten(branch_b_(b_in_(s_csi)))));
  out.bits = relaxed_bits ? c : nn::quantize(c);
  return out;
}

BsCsaNet::BsCsaNet(nn::ParamList& params, const Dims& d, num::Rng& rng) : dims_(d) {
  const nn::TransformerConfig tc{d.d_model, d.U, d.n_heads, d.d_ff};
  embed_ = nn::Linear(params, "bs_csa.embed", d.K * d.B, d.N_c * d.d_model, rng);
  trunk_ = nn::TransformerStack(params, "bs_csa.trunk", tc, rng);
  to_csi_ = nn::Linear(params, "bs_csa.to_csi", d.d_model, d.d_CSI, rng);
  c_in_ = nn::Linear(params, "bs_csa.combiner.embed", d.d_CSI, d.d_model, rng);
  branch_ = nn::TransformerStack(params, "bs_csa.combiner.tf", tc, rng);
  c_out_ = nn::Linear(params, "bs_csa.combiner.head", d.N_c * d.d_model, d.N_RF_r * d.N_r, rng);
}

BsCsaOutput BsCsaNet::operator()(const std::vector<Tensor>& bits) const {
  const Dims& d = dims_;
  if (bits.size() != d.K) {
    throw DimensionError("BS-CSANet expects " + std::to_string(d.K) + " feedback vectors, got " +
                         std::to_string(bits.size()));
  }
  for (const auto& b : bits) {
    if (b.shape() != num::Shape{d.B}) {
      throw DimensionError("feedback vector must hold " + std::to_string(d.B) + " bits, got " +
                           num::shape_str(b.shape()));
    }
  }
  Tensor seq = num::reshape(embed_(nn::dequantize(num::concat(bits, 0))), {d.N_c, d.d_model});
  BsCsaOutput out;
  out.s_csi = to_csi_(trunk_(seq));
  out.phi = num::reshape(c_out_(num::flatten(branch_(c_in_(out.s_csi)))), {d.N_RF_r, d.N_r});
  out.W = num::complex_exp_phase(out.phi);
  return out;
}

Tensor effective_channel(const Tensor& W, const Tensor& H, const Tensor& F) {
  return num::matmul(num::matmul(W, H), F);
}

Tensor data_channels(const channel::ChannelSet& ch, std::size_t k, std::size_t L) {
  if (ch.symbols() <= L) throw DimensionError("channel set has no data symbols after L = " + std::to_string(L));
  const std::size_t Q = ch.symbols() - L;
  return num::reshape(num::slice(num::slice(ch.H, 0, k, 1), 1, L, Q),
                      {Q * ch.subcarriers(), ch.n_r(), ch.n_t()});
}

Tensor spectral_efficiency(const Tensor& W, const std::vector<Tensor>& F, const channel::ChannelSet& ch,
                           std::size_t L, double P_t, double sigma2) {
  if (!(sigma2 > 0.0)) throw UsageError("spectral efficiency needs a positive noise variance");
  if (F.size() != ch.users()) throw DimensionError("one precoder per user is required");
  const double rho = P_t / sigma2;
  const std::size_t n = W.dim(0);
  Tensor eye = Tensor::eye(n, num::Dtype::complex);
  std::vector<Tensor> terms;
  for (std::size_t k = 0; k < F.size(); ++k) {
    Tensor M = effective_channel(W, data_channels(ch, k, L), F[k]);
    Tensor A = num::add(num::scale(num::matmul(M, num::hermitian(M)), rho), eye);
    terms.push_back(num::sum(num::logdet_hpd(A)));
  }
  Tensor total = terms[0];
  for (std::size_t k = 1; k < terms.size(); ++k) total = num::add(total, terms[k]);
  Tensor eta = num::scale(total, 1.0 / std::numbers::ln2);
  if (!std::isfinite(eta.item())) throw NumericError("spectral efficiency is not finite");
  return eta;
}

std::vector<Tensor> PhyOutput::F() const {
  std::vector<Tensor> f;
  for (const auto& u : ue) f.push_back(u.F);
  return f;
}

std::vector<Tensor> PhyOutput::s_csi_ue() const {
  std::vector<Tensor> s;
  for (const auto& u : ue) s.push_back(u.s_csi);
  return s;
}

PhyNet::PhyNet(const ExperimentConfig& cfg, num::Rng& init)
    : csirs(params, cfg.dims, init), ue(params, cfg.dims, init), bs(params, cfg.dims, init), cfg_(cfg) {}

PhyOutput PhyNet::operator()(const channel::ChannelSet& ch, double sigma2, num::Rng& noise) const {
  PhyOutput out;
  out.y_p = csirs.receive(ch, cfg_.physics.P_t, sigma2, noise);
  std::vector<Tensor> bits;
  for (const auto& y : out.y_p) {
    out.ue.push_back(ue(y));
    bits.push_back(out.ue.back().bits);
  }
  out.bs = bs(bits);
  return out;
}

Tensor random_phase_matrix(std::size_t rows, std::size_t cols, num::Rng& rng) {
  std::vector<double> th(rows * cols);
  for (auto& t : th) t = rng.uniform(-kPi, kPi);
  return num::complex_exp_phase(Tensor::real({rows, cols}, std::move(th)));
}

}  // namespace semlink::phy
