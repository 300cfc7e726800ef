// SPDX-License-Identifier: Apache-2.0
#include "semlink/semnet/semnet.hpp"

#include <cmath>

namespace semlink::sem {

Sfa::Sfa(nn::ParamList& params, const std::string& name, std::size_t d_s, std::size_t csi_len, std::size_t d_c,
         num::Rng& rng)
    : fc_csi(params, name + ".fc_csi", csi_len, d_c, rng),
      w1(params, name + ".w1", d_s + d_c, d_s, rng),
      w2(params, name + ".w2", d_s, d_s, rng),
      d_s_(d_s) {}

Tensor Sfa::operator()(const Tensor& f_s, const Tensor& f_csi, Tensor* gates) const {
  if (f_s.rank() != 3 || f_s.dim(0) != d_s_) {
    throw DimensionError("SFA expects a [" + std::to_string(d_s_) + ", H_s, W_s] feature, got " +
                         num::shape_str(f_s.shape()));
  }
  if (f_csi.numel() != fc_csi.in()) {
    throw DimensionError("SFA channel feature has " + std::to_string(f_csi.numel()) + " entries, expected " +
                         std::to_string(fc_csi.in()));
  }
  Tensor pooled = num::mean(f_s, {1, 2});
  Tensor v = fc_csi(num::flatten(f_csi));
  Tensor g = num::sigmoid(w2(num::relu(w1(num::concat({pooled, v}, 0)))));
  if (gates) *gates = g;
  return num::mul(f_s, num::reshape(g, {d_s_, 1, 1}));
}

UeMsfNet::UeMsfNet(nn::ParamList& params, const std::string& name, const Dims& d, std::size_t in_channels, Grid grid,
                   num::Rng& rng)
    : dims_(d), grid_(grid) {
  nn::CodecConfig cc{in_channels, d.H, d.W, d.d_s, d.H_s, d.W_s, d.C, d.codec_width};
  encoder_ = nn::ConvEncoder(params, name + ".encoder", cc, rng);
  sfa_ = Sfa(params, name + ".sfa", d.d_s, d.N_c * d.d_CSI, d.d_c, rng);
  map_ = nn::Linear(params, name + ".map", d.d_s * d.H_s * d.W_s, 2 * grid.count() * d.N_RF_t, rng);
}

Tensor UeMsfNet::raw_features(const Tensor& image, const Tensor& s_csi) const {
  Tensor f = sfa_(encoder_(image), s_csi);
  Tensor flat = num::reshape(map_(num::flatten(f)), {grid_.symbols, grid_.subcarriers, 2 * dims_.N_RF_t});
  return num::merge_re_im(flat);
}

Tensor UeMsfNet::normalize(const Tensor& s_bb, const Tensor& F, double P_t) {
  const std::size_t n_rf = s_bb.shape().back();
  const std::size_t res = s_bb.numel() / n_rf;
  Tensor tx = s_bb;
  if (F.defined()) tx = num::matmul(num::reshape(s_bb, {res, n_rf}), num::transpose(F));
  Tensor norm = num::frobenius_norm(tx);
  if (norm.item() == 0.0) throw NumericError("transmit feature has zero norm before power normalization");
  return num::scale(num::div(s_bb, norm), std::sqrt(P_t * static_cast<double>(res)));
}

Tensor UeMsfNet::operator()(const Tensor& image, const Tensor& s_csi, const Tensor& F, double P_t) const {
  return normalize(raw_features(image, s_csi), F, P_t);
}

BsMsfNet::BsMsfNet(nn::ParamList& params, const std::string& name, const Dims& d, std::size_t received, num::Rng& rng)
    : dims_(d), received_(received) {
  map_ = nn::Linear(params, name + ".map", 2 * received, d.d_s * d.H_s * d.W_s, rng);
  sfa_ = Sfa(params, name + ".sfa", d.d_s, d.N_c * d.d_CSI, d.d_c, rng);
  nn::CodecConfig cc{1, d.H, d.W, d.d_s, d.H_s, d.W_s, d.C, d.codec_width};
  decoder_ = nn::ConvDecoder(params, name + ".decoder", cc, rng);
}

Tensor BsMsfNet::operator()(const Tensor& y_bb, const Tensor& s_csi) const {
  if (!y_bb.is_complex() || y_bb.numel() != received_) {
    throw DimensionError("BS-MSFNet expects " + std::to_string(received_) + " complex received entries, got " +
                         num::shape_str(y_bb.shape()));
  }
  Tensor flat = num::split_re_im(num::reshape(agc(y_bb), {received_}));
  Tensor f = num::reshape(map_(flat), {dims_.d_s, dims_.H_s, dims_.W_s});
  return decoder_(sfa_(f, s_csi));
}

Tensor agc(const Tensor& y) {
  Tensor ms = num::mean(num::abs2(y));
  if (ms.item() == 0.0) return y;
  return num::div(y, num::sqrt(ms));
}

Tensor transmit_superpose(const std::vector<Tensor>& s_bb, const std::vector<Tensor>& F, const Tensor& W,
                          const channel::ChannelSet& ch, std::size_t L, double sigma2, num::Rng& noise) {
  if (s_bb.size() != F.size() || s_bb.size() != ch.users()) {
    throw DimensionError("transmit_superpose needs one feature and one precoder per user");
  }
  const std::size_t Q = ch.symbols() - L, Nc = ch.subcarriers(), Nr = ch.n_r(), Nt = ch.n_t();
  const std::size_t res = Q * Nc;
  Tensor y;
  for (std::size_t k = 0; k < s_bb.size(); ++k) {
    const std::size_t n_rf = F[k].dim(1);
    if (s_bb[k].shape() != num::Shape{Q, Nc, n_rf}) {
      throw DimensionError("user " + std::to_string(k) + " feature " + num::shape_str(s_bb[k].shape()) +
                           " does not fill the data grid");
    }
    Tensor x = num::reshape(num::matmul(num::reshape(s_bb[k], {res, n_rf}), num::transpose(F[k])), {res, Nt, 1});
    Tensor hx = num::matmul(
        num::reshape(num::slice(num::slice(ch.H, 0, k, 1), 1, L, Q), {res, Nr, Nt}), x);
    y = y.defined() ? num::add(y, hx) : hx;
  }
  y = channel::add_awgn(y, sigma2, noise);
  return num::reshape(num::matmul(W, y), {Q, Nc, W.dim(0)});
}

Tensor identity_superpose(const std::vector<Tensor>& s_bb) {
  if (s_bb.empty()) throw DimensionError("identity_superpose needs at least one user");
  Tensor y = s_bb[0];
  for (std::size_t k = 1; k < s_bb.size(); ++k) y = num::add(y, s_bb[k]);
  return y;
}

Tensor seg_loss(const Tensor& logits, std::span<const std::int32_t> label) { return num::cross_entropy(logits, label); }

std::vector<std::int32_t> predict(const Tensor& logits) {
  if (logits.rank() != 3) throw DimensionError("predict expects [C, H, W] logits");
  const std::size_t C = logits.dim(0), P = logits.dim(1) * logits.dim(2);
  const auto v = logits.storage();
  std::vector<std::int32_t> out(P, 0);
  for (std::size_t p = 0; p < P; ++p) {
    double best = v[p];
    for (std::size_t c = 1; c < C; ++c) {
      if (v[c * P + p] > best) {
        best = v[c * P + p];
        out[p] = static_cast<std::int32_t>(c);
      }
    }
  }
  return out;
}

void IouCounts::add(std::span<const std::int32_t> pred, std::span<const std::int32_t> truth) {
  if (pred.size() != truth.size()) throw DimensionError("prediction and label sizes differ");
  const auto C = static_cast<std::int32_t>(inter.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const auto p = pred[i], t = truth[i];
    if (t < 0 || t >= C) throw UsageError("label " + std::to_string(t) + " out of range");
    if (p < 0 || p >= C) throw UsageError("prediction " + std::to_string(p) + " out of range");
    if (p == t) {
      ++inter[t];
      ++uni[t];
      ++correct;
    } else {
      ++uni[p];
      ++uni[t];
    }
  }
  total += pred.size();
}

double IouCounts::iou(std::size_t c) const {
  return uni[c] == 0 ? std::nan("") : static_cast<double>(inter[c]) / static_cast<double>(uni[c]);
}

double IouCounts::miou() const {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < inter.size(); ++c) {
    if (uni[c] == 0) continue;
    s += iou(c);
    ++n;
  }
  return n == 0 ? 1.0 : s / static_cast<double>(n);
}

double IouCounts::pixel_accuracy() const {
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

double miou(const Tensor& logits, std::span<const std::int32_t> label) {
  IouCounts counts(logits.dim(0));
  counts.add(predict(logits), label);
  return counts.miou();
}

SemNet::SemNet(const ExperimentConfig& cfg, num::Rng& init, std::vector<Grid> grids) {
  const Dims& d = cfg.dims;
  if (grids.empty()) grids.assign(2, Grid{d.Q, d.N_c});
  if (grids.size() != 2) throw ConfigError("the multimodal task has exactly 2 users");
  ue.emplace_back(params, "ue_msf0", d, 3, grids[0], init);
  ue.emplace_back(params, "ue_msf1", d, 1, grids[1], init);
  // superposed users share the grid; orthogonal users' blocks are concatenated
  const bool shared = grids[0].count() == d.Q * d.N_c && grids[1].count() == d.Q * d.N_c;
  const std::size_t res = shared ? d.Q * d.N_c : grids[0].count() + grids[1].count();
  bs = BsMsfNet(params, "bs_msf", d, res * d.N_RF_r, init);
}

}  // namespace semlink::sem
