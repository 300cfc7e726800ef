// SPDX-License-Identifier: Apache-2.0
// Criteria checked against finite differences, closed forms and scalar loops.
#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <sstream>

#include "acceptance.hpp"
#include "gradcheck.hpp"
#include "semlink/baselines/baselines.hpp"
#include "semlink/channel/channel.hpp"
#include "semlink/phynet/phynet.hpp"
#include "semlink/semnet/semnet.hpp"
#include "semlink/trainer/trainer.hpp"

namespace semlink::acceptance {

namespace fs = std::filesystem;
using num::cplx;
using num::Tensor;
using testing::probe;
using testing::random_complex;
using testing::random_real;

namespace {

constexpr double kPi = std::numbers::pi;

using Fn = std::function<Tensor(const std::vector<Tensor>&)>;
using Gen = std::function<std::vector<Tensor>(num::Rng&)>;

struct OpCase {
  std::string name;
  Gen inputs;
  Fn f;
};

Tensor positive(const num::Shape& s, num::Rng& rng) { return random_real(s, rng, 0.5, 2.0); }

// HPD matrices A A^H + I built inside the checked function.
Tensor hpd(const Tensor& a) {
  const std::size_t n = a.dim(a.rank() - 1);
  return num::add(num::matmul(a, num::hermitian(a)), Tensor::eye(n, num::Dtype::complex));
}

std::vector<OpCase> op_cases() {
  std::vector<OpCase> c;
  auto add = [&](std::string name, Gen g, Fn f) { c.push_back({std::move(name), std::move(g), std::move(f)}); };
  auto R = [](num::Shape s) { return [s](num::Rng& r) { return std::vector<Tensor>{random_real(s, r)}; }; };
  auto C = [](num::Shape s) { return [s](num::Rng& r) { return std::vector<Tensor>{random_complex(s, r)}; }; };
  auto RR = [](num::Shape a, num::Shape b) {
    return [a, b](num::Rng& r) { return std::vector<Tensor>{random_real(a, r), random_real(b, r)}; };
  };
  auto CC = [](num::Shape a, num::Shape b) {
    return [a, b](num::Rng& r) { return std::vector<Tensor>{random_complex(a, r), random_complex(b, r)}; };
  };

  add("reshape", C({2, 3, 2}), [](auto& x) { return probe(num::reshape(x[0], {3, 4})); });
  add("flatten", R({2, 3}), [](auto& x) { return probe(num::flatten(x[0])); });
  add("permute", C({2, 3, 4}), [](auto& x) { return probe(num::permute(x[0], {2, 0, 1})); });
  add("transpose", C({3, 2, 4}), [](auto& x) { return probe(num::transpose(x[0])); });
  add("conj", C({5}), [](auto& x) { return probe(num::conj(x[0])); });
  add("hermitian", C({2, 3, 4}), [](auto& x) { return probe(num::hermitian(x[0])); });
  add("concat", CC({2, 3}, {2, 2}), [](auto& x) { return probe(num::concat({x[0], x[1]}, 1)); });
  add("slice", R({4, 5}), [](auto& x) { return probe(num::slice(x[0], 1, 1, 3)); });
  add("as_complex", R({3, 2}), [](auto& x) { return probe(num::as_complex(x[0])); });
  add("as_real", C({3, 2}), [](auto& x) { return probe(num::as_real(x[0])); });
  add("split_re_im", C({3, 4}), [](auto& x) { return probe(num::split_re_im(x[0])); });
  add("merge_re_im", R({3, 6}), [](auto& x) { return probe(num::merge_re_im(x[0])); });
  add("complex_exp_phase", R({2, 5}), [](auto& x) { return probe(num::complex_exp_phase(num::scale(x[0], 3.0))); });
  add("add", RR({3, 4}, {4}), [](auto& x) { return probe(num::add(x[0], x[1])); });
  add("add_complex", CC({2, 3, 2}, {3, 1}), [](auto& x) { return probe(num::add(x[0], x[1])); });
  add("sub", CC({3, 2}, {3, 2}), [](auto& x) { return probe(num::sub(x[0], x[1])); });
  add("mul", RR({3, 4}, {3, 1}), [](auto& x) { return probe(num::mul(x[0], x[1])); });
  add("mul_complex", CC({2, 4}, {4}), [](auto& x) { return probe(num::mul(x[0], x[1])); });
  add("scale", C({4}), [](auto& x) { return probe(num::scale(x[0], -1.7)); });
  add("scale_tensor", [](num::Rng& r) { return std::vector<Tensor>{random_complex({3, 2}, r), random_real({}, r)}; },
      [](auto& x) { return probe(num::scale(x[0], x[1])); });
  add("div", [](num::Rng& r) { return std::vector<Tensor>{random_complex({3, 2}, r), positive({}, r)}; },
      [](auto& x) { return probe(num::div(x[0], x[1])); });
  add("add_scalar", R({5}), [](auto& x) { return probe(num::add_scalar(x[0], 0.3)); });
  add("relu", R({4, 4}), [](auto& x) { return probe(num::relu(x[0])); });
  add("sigmoid", R({6}), [](auto& x) { return probe(num::sigmoid(num::scale(x[0], 3.0))); });
  add("log", [](num::Rng& r) { return std::vector<Tensor>{positive({6}, r)}; },
      [](auto& x) { return probe(num::log(x[0])); });
  add("sqrt", [](num::Rng& r) { return std::vector<Tensor>{positive({6}, r)}; },
      [](auto& x) { return probe(num::sqrt(x[0])); });
  add("reciprocal", [](num::Rng& r) { return std::vector<Tensor>{positive({6}, r)}; },
      [](auto& x) { return probe(num::reciprocal(x[0])); });
  add("to_complex", R({2, 3}), [](auto& x) { return probe(num::to_complex(x[0])); });
  add("abs2", C({2, 3}), [](auto& x) { return probe(num::abs2(x[0])); });
  add("sum", C({3, 4}), [](auto& x) { return probe(num::sum(x[0])); });
  add("sum_axes", R({2, 3, 4}), [](auto& x) { return probe(num::sum(x[0], {0, 2})); });
  add("mean", R({3, 4}), [](auto& x) { return probe(num::mean(x[0])); });
  add("mean_axes", C({2, 3, 4}), [](auto& x) { return probe(num::mean(x[0], {1})); });
  add("frobenius_norm", C({3, 3}), [](auto& x) { return num::frobenius_norm(x[0]); });
  add("softmax", R({3, 5}), [](auto& x) { return probe(num::softmax(num::scale(x[0], 2.0), 1)); });
  add("layer_norm", R({3, 8}), [](auto& x) { return probe(num::layer_norm(x[0])); });
  add("matmul", RR({3, 4}, {4, 2}), [](auto& x) { return probe(num::matmul(x[0], x[1])); });
  add("matmul_complex_batched", CC({3, 2, 4}, {4, 3}), [](auto& x) { return probe(num::matmul(x[0], x[1])); });
  add("logdet_hpd", C({3, 2, 2}), [](auto& x) { return probe(num::logdet_hpd(hpd(x[0]))); });
  add("logdet_hpd_4x4", C({4, 4}), [](auto& x) { return num::logdet_hpd(hpd(x[0])); });
  add("conv2d", [](num::Rng& r) {
        return std::vector<Tensor>{random_real({2, 6, 6}, r), random_real({3, 2, 3, 3}, r), random_real({3}, r)};
      },
      [](auto& x) { return probe(num::conv2d(x[0], x[1], x[2], 1, 1)); });
  add("conv2d_stride2", [](num::Rng& r) {
        return std::vector<Tensor>{random_real({2, 8, 8}, r), random_real({2, 2, 3, 3}, r), random_real({2}, r)};
      },
      [](auto& x) { return probe(num::conv2d(x[0], x[1], x[2], 2, 1)); });
  add("upsample_nearest", R({2, 3, 3}), [](auto& x) { return probe(num::upsample_nearest(x[0], 2)); });
  add("cross_entropy", R({4, 3, 3}), [](auto& x) {
    const std::vector<std::int32_t> lab{0, 1, 2, 3, 3, 2, 1, 0, 2};
    return num::cross_entropy(num::scale(x[0], 2.0), lab);
  });
  return c;
}

// Straight-through ops have no finite-difference derivative by design; their
// backward must hand the upstream gradient through unchanged.
bool straight_through_passes(std::uint64_t seed, std::string& why) {
  num::Rng rng(seed);
  const Tensor up = random_real({12}, rng);
  const std::vector<std::pair<const char*, std::function<Tensor(const Tensor&)>>> ops{
      {"quantize_st", [](const Tensor& c) { return num::quantize_st(c); }},
      {"nn::quantize", [](const Tensor& c) { return nn::quantize(c); }},
      {"straight_through", [&](const Tensor& c) { return base::straight_through(c, num::scale(c.detach(), 2.0)); }}};
  for (const auto& [name, op] : ops) {
    Tensor x = random_real({12}, rng, 0.0, 1.0);
    x.set_requires_grad(true);
    num::backward(num::sum(num::mul(op(x), up)));
    if (x.grad() != up.to_vector()) {
      why = name;
      return false;
    }
  }
  return true;
}

ExperimentConfig small_phy() {
  ExperimentConfig c;
  auto& d = c.dims;
  d.N_t = 2;
  d.N_r = 4;
  d.N_c = 4;
  d.L = 2;
  d.B = 8;
  d.Q = 1;
  d.d_model = 8;
  d.U = 1;
  d.n_heads = 2;
  d.d_ff = 8;
  d.d_CSI = 4;
  return c;
}

}  // namespace

Outcome gradient_correctness(const Context&) {
  const Stopwatch clock;
  double worst_op = 0.0, worst_eta = 0.0, worst_seg = 0.0;
  std::string worst_name, failure;
  const auto cases = op_cases();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const auto& oc : cases) {
      num::Rng rng(seed * 1000 + 17);
      const auto r = testing::gradcheck(oc.f, oc.inputs(rng));
      if (r.rel_error > worst_op) {
        worst_op = r.rel_error;
        worst_name = oc.name;
      }
    }
    std::string why;
    if (!straight_through_passes(seed, why)) failure = "straight-through backward of " + why;

    // CSI-RS -> CSANets -> eta, through every physical parameter
    {
      const ExperimentConfig cfg = small_phy();
      num::Rng init(seed + 50);
      phy::PhyNet net(cfg, init);
      net.ue.relaxed_bits = true;
      num::Rng crng(seed + 60);
      const auto set = channel::realize(cfg, crng);
      auto loss = [&] {
        num::Rng noise(seed + 70);
        const auto out = net(set, cfg.noise_var(), noise);
        return phy::spectral_efficiency(out.bs.W, out.F(), set, cfg.dims.L, cfg.physics.P_t, cfg.noise_var());
      };
      worst_eta = std::max(worst_eta, testing::gradcheck_leaves(net.params.tensors(), loss, 1e-5, 300, seed).rel_error);
    }
    // encoder -> SFA -> power normalization -> channel -> AGC -> SFA -> decoder -> L_seg
    {
      const ExperimentConfig cfg;
      const auto& d = cfg.dims;
      num::Rng init(seed + 80);
      sem::SemNet net(cfg, init);
      num::Rng rng(seed + 90);
      const auto sample = sem::gen_multimodal_sample(rng, sem::scene_params(cfg));
      const auto set = channel::realize(cfg, rng);
      const Tensor csi0 = random_real({d.N_c, d.d_CSI}, rng), csi1 = random_real({d.N_c, d.d_CSI}, rng);
      const Tensor csib = random_real({d.N_c, d.d_CSI}, rng);
      const Tensor F0 = phy::random_phase_matrix(d.N_t, d.N_RF_t, rng);
      const Tensor F1 = phy::random_phase_matrix(d.N_t, d.N_RF_t, rng);
      const Tensor W = phy::random_phase_matrix(d.N_RF_r, d.N_r, rng);
      auto loss = [&] {
        const Tensor s0 = net.ue[0](sample.mod_a, csi0, F0, cfg.physics.P_t);
        const Tensor s1 = net.ue[1](sample.mod_b, csi1, F1, cfg.physics.P_t);
        num::Rng noise(seed + 100);
        const Tensor y = sem::transmit_superpose({s0, s1}, {F0, F1}, W, set, d.L, cfg.noise_var(), noise);
        return sem::seg_loss(net.bs(y, csib), sample.label);
      };
      worst_seg = std::max(worst_seg, testing::gradcheck_leaves(net.params.tensors(), loss, 1e-5, 300, seed).rel_error);
    }
  }
  const double t = clock.seconds();
  Outcome o;
  o.pass = failure.empty() && worst_op < 1e-4 && worst_eta < 1e-4 && worst_seg < 1e-3 && t < 120.0;
  o.detail = std::to_string(cases.size()) + " op cases x 10 seeds, worst " + fmt(worst_op, 2) + " (" + worst_name +
             ", tol 1e-4); CSI-RS->eta " + fmt(worst_eta, 2) + " (tol 1e-4); encoder->L_seg " + fmt(worst_seg, 3) +
             " (tol 1e-3); " + (failure.empty() ? "straight-through exact" : failure + " wrong") + "; " + fmt(t, 3) +
             " s (limit 120)";
  return o;
}

Outcome constraint_exactness(const Context&) {
  double unit = 0.0, pilot = 0.0, data = 0.0;
  std::size_t passes = 0;
  auto unit_err = [&](const Tensor& t) {
    for (auto z : t.to_complex_vector()) unit = std::max(unit, std::abs(std::abs(z) - 1.0));
  };
  num::NoGradGuard guard;
  for (std::uint64_t net_seed = 0; net_seed < 10; ++net_seed) {
    ExperimentConfig cfg;
    num::Rng draw(net_seed + 500);
    cfg.physics.P_t = draw.uniform(0.25, 4.0);
    cfg.physics.snr_db = draw.uniform(-10.0, 20.0);
    const auto& d = cfg.dims;
    num::Rng init(net_seed);
    phy::PhyNet pnet(cfg, init);
    sem::SemNet snet(cfg, init);
    for (int b = 0; b < 10; ++b, ++passes) {
      const auto set = channel::realize(cfg, draw);
      const auto sample = sem::gen_multimodal_sample(draw, sem::scene_params(cfg));
      const auto out = pnet(set, cfg.noise_var(), draw);
      unit_err(pnet.csirs.x_rf());
      unit_err(pnet.csirs.v_rf());
      unit_err(out.bs.W);
      const auto p = pnet.csirs.pilots(cfg.physics.P_t).to_complex_vector();
      for (std::size_t ln = 0; ln < d.L * d.N_c; ++ln) {
        double e = 0.0;
        for (std::size_t r = 0; r < d.N_r; ++r) e += std::norm(p[ln * d.N_r + r]);
        pilot = std::max(pilot, std::abs(e - cfg.physics.P_t));
      }
      for (std::size_t k = 0; k < d.K; ++k) {
        const Tensor& F = out.ue[k].F;
        unit_err(F);
        const Tensor s = snet.ue[k](k == 0 ? sample.mod_a : sample.mod_b, out.ue[k].s_csi, F, cfg.physics.P_t);
        const auto fv = F.to_complex_vector(), sv = s.to_complex_vector();
        double e = 0.0;
        for (std::size_t re = 0; re < d.Q * d.N_c; ++re)
          for (std::size_t a = 0; a < d.N_t; ++a) {
            cplx x = 0.0;
            for (std::size_t j = 0; j < d.N_RF_t; ++j) x += fv[a * d.N_RF_t + j] * sv[re * d.N_RF_t + j];
            e += std::norm(x);
          }
        const double target = cfg.physics.P_t * double(d.N_c * d.Q);
        data = std::max(data, std::abs(e - target) / target);
      }
    }
  }
  Outcome o;
  o.pass = unit <= 1e-9 && pilot <= 1e-12 && data <= 1e-9;
  o.detail = std::to_string(passes) + " fuzzed forward passes: unit-modulus dev " + fmt(unit, 2) +
             " (tol 1e-9), pilot power dev " + fmt(pilot, 2) + " (tol 1e-12), data power rel dev " + fmt(data, 2) +
             " (tol 1e-9)";
  return o;
}

namespace {

cplx entry_oracle(const std::vector<channel::Path>& paths, const channel::OfdmConfig& o, std::size_t Nr,
                  std::size_t Nt, std::size_t q1, std::size_t n, std::size_t i, std::size_t j) {
  cplx h = 0.0;
  const cplx J(0.0, 1.0);
  for (const auto& p : paths) {
    const cplx ar = std::exp(J * kPi * double(i) * std::sin(p.theta_r)) / std::sqrt(double(Nr));
    const cplx at = std::exp(J * kPi * double(j) * std::sin(p.theta_t)) / std::sqrt(double(Nt));
    h += p.alpha * ar * std::conj(at) * std::exp(-J * 2.0 * kPi * double(n) * p.tau / (double(o.N_c) * o.T_s)) *
         std::exp(J * 2.0 * kPi * p.f_d * double(q1) * o.T_I);
  }
  return h / std::sqrt(double(paths.size()));
}

double channel_oracle(std::uint64_t seed) {
  ExperimentConfig cfg;
  num::Rng rng(seed + 3000);
  const std::size_t Nr = rng.uniform_int(1, 8), Nt = rng.uniform_int(1, 4), Nc = rng.uniform_int(2, 8);
  const std::size_t S = rng.uniform_int(2, 5);
  const auto o = channel::OfdmConfig::make(Nc, cfg.physics.delta_f, cfg.physics.f_c);
  const auto ps = channel::sample_paths(channel::PathParams::from(cfg, o), 2, rng);
  const auto set = channel::assemble_channel(ps, o, Nr, Nt, S);
  double err = 0.0;
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t q = 0; q < S; ++q)
      for (std::size_t n = 0; n < Nc; ++n) {
        const auto m = set.matrix(k, q, n);
        for (std::size_t i = 0; i < Nr; ++i)
          for (std::size_t j = 0; j < Nt; ++j)
            err = std::max(err, std::abs(m[i * Nt + j] - entry_oracle(ps.users[k], o, Nr, Nt, q + 1, n, i, j)));
      }
  return err;
}

double csirs_oracle(std::uint64_t seed) {
  ExperimentConfig cfg = small_phy();
  auto& d = cfg.dims;
  num::Rng rng(seed + 4000);
  d.N_r = rng.uniform_int(2, 6);
  d.N_t = rng.uniform_int(2, 4);
  d.L = rng.uniform_int(1, 3);
  cfg.physics.P_t = rng.uniform(0.5, 2.0);
  nn::ParamList ps;
  phy::CsiRsNet net(ps, d, rng);
  const auto set = channel::realize(cfg, rng);
  num::Rng noise(1);
  const auto y = net.receive(set, cfg.physics.P_t, 0.0, noise);
  const auto xb = net.x_bb.to_vector(), pr = net.p_rf.to_vector(), qr = net.q_rf.to_vector();
  double err = 0.0;
  for (std::size_t k = 0; k < d.K; ++k)
    for (std::size_t l = 0; l < d.L; ++l)
      for (std::size_t n = 0; n < d.N_c; ++n) {
        std::vector<cplx> p(d.N_r, 0.0);
        double e = 0.0;
        for (std::size_t b = 0; b < d.N_r; ++b) {
          for (std::size_t c = 0; c < d.N_RF_r; ++c) {
            const std::size_t o = ((l * d.N_c + n) * d.N_RF_r + c) * 2;
            p[b] += std::polar(1.0, pr[(l * d.N_r + b) * d.N_RF_r + c]) * cplx(xb[o], xb[o + 1]);
          }
          e += std::norm(p[b]);
        }
        for (auto& v : p) v *= std::sqrt(cfg.physics.P_t / e);
        const auto H = set.matrix(k, l, n);
        for (std::size_t i = 0; i < d.N_RF_t; ++i) {
          cplx acc = 0.0;
          for (std::size_t a = 0; a < d.N_t; ++a) {
            cplx ht = 0.0;
            for (std::size_t b = 0; b < d.N_r; ++b) ht += H[b * d.N_t + a] * p[b];
            acc += std::polar(1.0, qr[((k * d.L + l) * d.N_RF_t + i) * d.N_t + a]) * ht;
          }
          err = std::max(err, std::abs(acc - y[k].cat((n * d.N_RF_t + i) * d.L + l)));
        }
      }
  return err;
}

double superposition_oracle(std::uint64_t seed) {
  ExperimentConfig cfg;
  const auto& d = cfg.dims;
  num::Rng rng(seed + 5000);
  const auto set = channel::realize(cfg, rng);
  std::vector<Tensor> s, F;
  for (std::size_t k = 0; k < d.K; ++k) {
    s.push_back(random_complex({d.Q, d.N_c, d.N_RF_t}, rng));
    F.push_back(phy::random_phase_matrix(d.N_t, d.N_RF_t, rng));
  }
  const Tensor W = phy::random_phase_matrix(d.N_RF_r, d.N_r, rng);
  num::Rng noise(0);
  const auto y = sem::transmit_superpose(s, F, W, set, d.L, 0.0, noise).to_complex_vector();
  const auto wv = W.to_complex_vector();
  double err = 0.0;
  for (std::size_t q = 0; q < d.Q; ++q)
    for (std::size_t n = 0; n < d.N_c; ++n) {
      std::vector<cplx> r(d.N_r, 0.0);
      for (std::size_t k = 0; k < d.K; ++k) {
        const auto H = set.matrix(k, d.L + q, n);
        const auto fv = F[k].to_complex_vector(), sv = s[k].to_complex_vector();
        for (std::size_t a = 0; a < d.N_t; ++a) {
          cplx x = 0.0;
          for (std::size_t j = 0; j < d.N_RF_t; ++j) x += fv[a * d.N_RF_t + j] * sv[(q * d.N_c + n) * d.N_RF_t + j];
          for (std::size_t b = 0; b < d.N_r; ++b) r[b] += H[b * d.N_t + a] * x;
        }
      }
      for (std::size_t i = 0; i < d.N_RF_r; ++i) {
        cplx acc = 0.0;
        for (std::size_t b = 0; b < d.N_r; ++b) acc += wv[i * d.N_r + b] * r[b];
        err = std::max(err, std::abs(acc - y[(q * d.N_c + n) * d.N_RF_r + i]));
      }
    }
  return err;
}

double miou_oracle(std::uint64_t seed) {
  num::Rng rng(seed + 6000);
  const std::size_t C = 4, H = rng.uniform_int(2, 12), W = rng.uniform_int(2, 12);
  const Tensor logits = random_real({C, H, W}, rng);
  std::vector<std::int32_t> label(H * W);
  for (auto& l : label) l = static_cast<std::int32_t>(rng.uniform_int(0, C - 1));
  const auto v = logits.to_vector();
  std::vector<std::int32_t> pred(H * W, 0);
  for (std::size_t p = 0; p < H * W; ++p)
    for (std::size_t c = 1; c < C; ++c)
      if (v[c * H * W + p] > v[pred[p] * H * W + p]) pred[p] = static_cast<std::int32_t>(c);
  double acc = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < C; ++c) {
    std::size_t inter = 0, uni = 0;
    for (std::size_t p = 0; p < H * W; ++p) {
      const bool a = pred[p] == std::int32_t(c), b = label[p] == std::int32_t(c);
      inter += a && b;
      uni += a || b;
    }
    if (uni > 0) {
      acc += double(inter) / double(uni);
      ++present;
    }
  }
  return std::abs(sem::miou(logits, label) - acc / double(present));
}

double logdet_oracle(std::uint64_t seed) {
  num::Rng rng(seed + 7000);
  const double a = rng.uniform(0.2, 5.0), d = rng.uniform(0.2, 5.0);
  const double bound = std::sqrt(a * d) * 0.999;
  const cplx b = std::polar(rng.uniform(0.0, bound), rng.uniform(-kPi, kPi));
  const Tensor m = Tensor::complex({2, 2}, {a, b, std::conj(b), d});
  return std::abs(num::logdet_hpd(m).item() - std::log(a * d - std::norm(b)));
}

}  // namespace

Outcome oracle_equivalence(const Context&) {
  const Stopwatch clock;
  num::NoGradGuard guard;
  const std::vector<std::pair<const char*, double (*)(std::uint64_t)>> checks{
      {"channel assembly", channel_oracle}, {"CSI-RS reception", csirs_oracle},
      {"superposition", superposition_oracle}, {"mIoU", miou_oracle}, {"2x2 logdet", logdet_oracle}};
  bool pass = true;
  std::ostringstream os;
  for (const auto& [name, fn] : checks) {
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) worst = std::max(worst, fn(s));
    pass = pass && worst <= 1e-9;
    os << name << " " << fmt(worst, 2) << ", ";
  }
  const double t = clock.seconds();
  os << "tol 1e-9 over 100 instances each; " << fmt(t, 3) << " s (limit 60)";
  return {pass && t < 60.0, os.str()};
}

Outcome checkpoint_integrity(const Context& ctx) {
  const fs::path dir = fs::path(ctx.out_dir) / "c8";
  fs::remove_all(dir);
  ExperimentConfig cfg = ctx.preset("desk");
  bool pass = true;
  std::ostringstream os;
  for (auto variant : {train::Variant::superposed, train::Variant::dmrs_baseline}) {
    cfg.training.seed = 21;
    train::System a(cfg, variant);
    // move away from the initialization so the loaded values are non-trivial
    num::Rng jitter(5);
    const int stage = variant == train::Variant::dmrs_baseline ? 4 : 3;
    for (auto* list : train::stage_params(a, stage))
      for (const auto& p : list->items()) {
        auto v = p.tensor.to_vector();
        for (auto& x : v) x += jitter.normal(0.0, 1e-3);
        Tensor(p.tensor).assign(v);
      }
    const fs::path ck = dir / train::to_string(variant);
    train::save_checkpoint(ck.string(), train::stage_params(static_cast<const train::System&>(a), stage),
                           {train::stage_hash(cfg, stage), stage, 0, train::to_string(variant), 0.0});
    cfg.training.seed = 21;
    train::System b(cfg, variant);
    // b starts from different values until the load
    for (auto* list : train::stage_params(b, stage))
      for (const auto& p : list->items()) {
        auto v = p.tensor.to_vector();
        for (auto& x : v) x = -x;
        Tensor(p.tensor).assign(v);
      }
    train::load_checkpoint(ck.string(), train::stage_params(b, stage), train::stage_hash(cfg, stage),
                           train::to_string(variant));
    std::size_t equal = 0;
    num::Rng rng(99);
    for (int i = 0; i < 10; ++i) {
      num::NoGradGuard guard;
      const auto sample = sem::gen_multimodal_sample(rng, sem::scene_params(cfg));
      const auto set = channel::realize(cfg, rng);
      num::Rng na(1000 + i), nb(1000 + i);
      const auto fa = train::forward_link(a, sample, set, na);
      const auto fb = train::forward_link(b, sample, set, nb);
      equal += fa.logits.to_vector() == fb.logits.to_vector() && fa.eta == fb.eta;
    }
    const auto ea = train::evaluate(a, sem::Split::val, train::Path::link, 10);
    const auto eb = train::evaluate(b, sem::Split::val, train::Path::link, 10);
    const bool same_eval = ea.miou == eb.miou && ea.eta == eb.eta && ea.pixel_accuracy == eb.pixel_accuracy &&
                           ea.class_iou.size() == eb.class_iou.size();
    pass = pass && equal == 10 && same_eval;
    os << train::to_string(variant) << ": " << equal << "/10 forwards bit-identical, evaluate "
       << (same_eval ? "identical" : "differs") << "; ";
  }
  fs::remove_all(dir);
  return {pass, os.str()};
}

}  // namespace semlink::acceptance
