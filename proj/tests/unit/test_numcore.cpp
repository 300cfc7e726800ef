// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "gradcheck.hpp"
#include "semlink/numcore/adam.hpp"
#include "semlink/numcore/ops.hpp"

namespace num = semlink::num;
using num::Tensor;
using semlink::testing::gradcheck;
using semlink::testing::probe;
using semlink::testing::random_complex;
using semlink::testing::random_real;

namespace {

using Fn = std::function<Tensor(const std::vector<Tensor>&)>;

void expect_grad(const Fn& f, const std::vector<Tensor>& xs, double tol = 1e-4) {
  const auto r = gradcheck(f, xs);
  EXPECT_LT(r.rel_error, tol) << "analytic " << r.analytic_norm << " numeric " << r.numeric_norm;
}

std::vector<num::cplx> triple_loop(const std::vector<num::cplx>& a, const std::vector<num::cplx>& b,
                                   std::size_t m, std::size_t k, std::size_t n) {
  std::vector<num::cplx> c(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      num::cplx acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  return c;
}

}  // namespace

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  num::Rng rng(1);
  Tensor m = random_real({2, 3}, rng);
  Tensor y = num::matmul(Tensor::eye(2), m);
  EXPECT_EQ(y.to_vector(), m.to_vector());
}

TEST(Matmul, PermutationSwapsRows) {
  Tensor p = Tensor::real({2, 2}, {0, 1, 1, 0});
  Tensor v = Tensor::real({2, 1}, {3.5, -2.0});
  EXPECT_EQ(num::matmul(p, v).to_vector(), (std::vector<double>{-2.0, 3.5}));
}

TEST(Matmul, ComplexMatchesTripleLoop) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    num::Rng rng(seed);
    Tensor a = random_complex({3, 3}, rng), b = random_complex({3, 3}, rng);
    const auto ref = triple_loop(a.to_complex_vector(), b.to_complex_vector(), 3, 3, 3);
    const auto got = num::matmul(a, b).to_complex_vector();
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_LT(std::abs(ref[i] - got[i]), 1e-12);
  }
}

TEST(Matmul, BatchedWithBroadcastOperand) {
  num::Rng rng(4);
  Tensor a = random_complex({3, 2, 4}, rng), b = random_complex({4, 5}, rng);
  Tensor c = num::matmul(a, b);
  ASSERT_EQ(c.shape(), (num::Shape{3, 2, 5}));
  const auto av = a.to_complex_vector(), bv = b.to_complex_vector(), cv = c.to_complex_vector();
  for (std::size_t t = 0; t < 3; ++t) {
    std::vector<num::cplx> at(av.begin() + t * 8, av.begin() + (t + 1) * 8);
    const auto ref = triple_loop(at, bv, 2, 4, 5);
    for (std::size_t i = 0; i < 10; ++i) EXPECT_LT(std::abs(ref[i] - cv[t * 10 + i]), 1e-12);
  }
}

TEST(Matmul, Associative) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    num::Rng rng(seed + 100);
    Tensor a = random_complex({3, 4}, rng), b = random_complex({4, 2}, rng), c = random_complex({2, 3}, rng);
    const auto l = num::matmul(num::matmul(a, b), c).to_complex_vector();
    const auto r = num::matmul(a, num::matmul(b, c)).to_complex_vector();
    for (std::size_t i = 0; i < l.size(); ++i) EXPECT_LT(std::abs(l[i] - r[i]), 1e-10);
  }
}

TEST(Matmul, ShapeMismatchThrows) {
  EXPECT_THROW(num::matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), semlink::DimensionError);
  EXPECT_THROW(num::matmul(Tensor::zeros({2, 2}), Tensor::zeros({2, 2}, num::Dtype::complex)),
               semlink::DtypeError);
}

TEST(ComplexExpPhase, KnownValuesAndUnitModulus) {
  Tensor y = num::complex_exp_phase(Tensor::real({2}, {0.0, std::numbers::pi / 2}));
  EXPECT_NEAR(y.cat(0).real(), 1.0, 1e-15);
  EXPECT_NEAR(y.cat(0).imag(), 0.0, 1e-15);
  EXPECT_NEAR(y.cat(1).real(), 0.0, 1e-12);
  EXPECT_NEAR(y.cat(1).imag(), 1.0, 1e-12);
  num::Rng rng(3);
  Tensor z = num::complex_exp_phase(random_real({50}, rng, -10, 10));
  for (auto c : z.to_complex_vector()) EXPECT_LT(std::abs(std::abs(c) - 1.0), 1e-12);
  EXPECT_THROW(num::complex_exp_phase(Tensor::zeros({1}, num::Dtype::complex)), semlink::DtypeError);
}

TEST(ComplexExpPhase, RealPartDerivativeIsMinusSine) {
  num::Rng rng(8);
  Tensor th = random_real({6}, rng, -3, 3);
  th.set_requires_grad(true);
  Tensor re = num::sum(num::slice(num::as_real(num::complex_exp_phase(th)), 1, 0, 1));
  num::backward(re);
  const auto g = th.grad();
  for (std::size_t i = 0; i < 6; ++i) {
    const double t = th.at(i), h = 1e-5;
    const double fd = (std::cos(t + h) - std::cos(t - h)) / (2 * h);
    EXPECT_NEAR(g[i], -std::sin(t), 1e-12);
    EXPECT_NEAR(fd, g[i], 1e-6);
  }
}

TEST(LogdetHpd, KnownValues) {
  EXPECT_NEAR(num::logdet_hpd(Tensor::eye(2, num::Dtype::complex)).item(), 0.0, 1e-15);
  Tensor d = Tensor::complex({2, 2}, {2.0, 0.0, 0.0, 3.0});
  EXPECT_NEAR(num::logdet_hpd(d).item(), std::log(6.0), 1e-14);
}

TEST(LogdetHpd, MatchesClosedForm2x2) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    num::Rng rng(seed);
    const double a = rng.uniform(1.0, 3.0), d = rng.uniform(1.0, 3.0);
    const num::cplx b(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
    Tensor m = Tensor::complex({2, 2}, {a, b, std::conj(b), d});
    EXPECT_NEAR(num::logdet_hpd(m).item(), std::log(a * d - std::norm(b)), 1e-10);
  }
}

TEST(LogdetHpd, NonPositivePivotNamesEntry) {
  Tensor m = Tensor::complex({2, 2}, {1.0, 2.0, 2.0, 1.0});
  try {
    num::logdet_hpd(m);
    FAIL() << "expected NumericError";
  } catch (const semlink::NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("(1,1)"), std::string::npos) << e.what();
  }
}

TEST(LogdetHpd, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    num::Rng rng(seed + 7);
    Tensor m = random_complex({2, 3, 2}, rng);
    // A = I + M M^H is HPD for any M; the check runs through M.
    expect_grad(
        [](const std::vector<Tensor>& x) {
          Tensor a = num::add(num::matmul(x[0], num::hermitian(x[0])), Tensor::eye(3, num::Dtype::complex));
          return num::sum(num::logdet_hpd(a));
        },
        {num::reshape(m, {2, 3, 2})}, 1e-5);
  }
}

TEST(Elementwise, TrivialValues) {
  Tensor r = num::relu(Tensor::real({2}, {-1.0, 2.0}));
  EXPECT_EQ(r.to_vector(), (std::vector<double>{0.0, 2.0}));
  Tensor s = num::softmax(Tensor::filled({4}, 0.3), 0);
  for (double v : s.to_vector()) EXPECT_NEAR(v, 0.25, 1e-15);
  EXPECT_THROW(num::softmax(Tensor::filled({4}, 0.3), 1), semlink::DimensionError);
  EXPECT_THROW(num::add(Tensor::zeros({2, 3}), Tensor::zeros({4})), semlink::DimensionError);
}

class OpGradient : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(OpGradient, EveryOpMatchesFiniteDifferences) {
  const std::uint64_t seed = GetParam();
  num::Rng rng(seed);
  auto R = [&](num::Shape s) { return random_real(s, rng); };
  auto C = [&](num::Shape s) { return random_complex(s, rng); };
  auto check = [&](const char* name, const Fn& f, const std::vector<Tensor>& xs) {
    SCOPED_TRACE(name);
    expect_grad([&](const std::vector<Tensor>& x) { return probe(f(x), seed); }, xs);
  };
  check("add", [](auto& x) { return num::add(x[0], x[1]); }, {R({2, 3}), R({3})});
  check("add_c", [](auto& x) { return num::add(x[0], x[1]); }, {C({2, 3}), C({2, 1})});
  check("sub", [](auto& x) { return num::sub(x[0], x[1]); }, {C({4}), C({4})});
  check("mul", [](auto& x) { return num::mul(x[0], x[1]); }, {R({2, 3}), R({2, 3})});
  check("mul_c", [](auto& x) { return num::mul(x[0], x[1]); }, {C({3, 2}), C({2})});
  check("scale", [](auto& x) { return num::scale(x[0], 1.7); }, {C({3})});
  check("scale_t", [](auto& x) { return num::scale(x[0], x[1]); }, {C({3}), R({})});
  check("div", [](auto& x) { return num::div(x[0], num::add_scalar(num::abs2(x[1]), 1.0)); }, {C({3}), R({})});
  check("relu", [](auto& x) { return num::relu(x[0]); }, {R({7})});
  check("sigmoid", [](auto& x) { return num::sigmoid(x[0]); }, {R({5})});
  check("log", [](auto& x) { return num::log(num::add_scalar(num::abs2(x[0]), 0.5)); }, {R({4})});
  check("sqrt", [](auto& x) { return num::sqrt(num::add_scalar(num::abs2(x[0]), 0.5)); }, {R({4})});
  check("reciprocal", [](auto& x) { return num::reciprocal(num::add_scalar(num::abs2(x[0]), 0.5)); }, {R({4})});
  check("to_complex", [](auto& x) { return num::to_complex(x[0]); }, {R({2, 2})});
  check("abs2", [](auto& x) { return num::abs2(x[0]); }, {C({2, 2})});
  check("sum", [](auto& x) { return num::sum(x[0]); }, {C({2, 3})});
  check("sum_axes", [](auto& x) { return num::sum(x[0], {0, 2}); }, {R({2, 3, 2})});
  check("mean", [](auto& x) { return num::mean(x[0]); }, {R({2, 3})});
  check("mean_axes", [](auto& x) { return num::mean(x[0], {1}); }, {C({2, 3, 2})});
  check("frobenius", [](auto& x) { return num::frobenius_norm(x[0]); }, {C({2, 3})});
  check("softmax0", [](auto& x) { return num::softmax(x[0], 0); }, {R({3, 4})});
  check("softmax1", [](auto& x) { return num::softmax(x[0], 1); }, {R({3, 4})});
  check("layer_norm", [](auto& x) { return num::layer_norm(x[0]); }, {R({3, 5})});
  check("concat", [](auto& x) { return num::concat({x[0], x[1]}, 1); }, {C({2, 1}), C({2, 3})});
  check("slice", [](auto& x) { return num::slice(x[0], 1, 1, 2); }, {R({2, 4})});
  check("reshape", [](auto& x) { return num::reshape(x[0], {3, 2}); }, {C({2, 3})});
  check("permute", [](auto& x) { return num::permute(x[0], {2, 0, 1}); }, {C({2, 3, 4})});
  check("transpose", [](auto& x) { return num::transpose(x[0]); }, {R({2, 3})});
  check("hermitian", [](auto& x) { return num::hermitian(x[0]); }, {C({2, 3})});
  check("conj", [](auto& x) { return num::conj(x[0]); }, {C({3})});
  check("as_complex", [](auto& x) { return num::as_complex(x[0]); }, {R({3, 2})});
  check("split_re_im", [](auto& x) { return num::split_re_im(x[0]); }, {C({2, 3})});
  check("merge_re_im", [](auto& x) { return num::merge_re_im(x[0]); }, {R({2, 4})});
  check("exp_phase", [](auto& x) { return num::complex_exp_phase(x[0]); }, {R({2, 3})});
  check("matmul", [](auto& x) { return num::matmul(x[0], x[1]); }, {R({2, 3}), R({3, 4})});
  check("matmul_c", [](auto& x) { return num::matmul(x[0], x[1]); }, {C({2, 2, 3}), C({3, 2})});
  check("matmul_cb", [](auto& x) { return num::matmul(x[0], x[1]); }, {C({3, 2}), C({2, 2, 3})});
  check("conv2d", [](auto& x) { return num::conv2d(x[0], x[1], x[2], 2, 1); },
        {R({2, 5, 5}), R({3, 2, 3, 3}), R({3})});
  check("conv2d_s1", [](auto& x) { return num::conv2d(x[0], x[1], x[2], 1, 1); },
        {R({2, 4, 4}), R({2, 2, 3, 3}), R({2})});
  check("upsample", [](auto& x) { return num::upsample_nearest(x[0], 2); }, {R({2, 2, 3})});
  const std::vector<std::int32_t> labels{0, 2, 1, 1, 0, 2};
  check("cross_entropy", [&](auto& x) { return num::cross_entropy(x[0], labels); }, {R({3, 2, 3})});
}

INSTANTIATE_TEST_SUITE_P(Seeds, OpGradient, ::testing::Range<std::uint64_t>(0, 10));

TEST(Backward, SumGivesOnes) {
  Tensor x = Tensor::parameter({3}, {1.0, -2.0, 0.5});
  num::backward(num::sum(x));
  EXPECT_EQ(x.grad(), (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(Backward, SquaredNormGivesTwoX) {
  Tensor x = Tensor::parameter({3}, {1.0, -2.0, 0.5});
  num::backward(num::sum(num::abs2(x)));
  EXPECT_EQ(x.grad(), (std::vector<double>{2.0, -4.0, 1.0}));
}

TEST(Backward, LeafInTwoBranchesAccumulates) {
  num::Rng rng(5);
  expect_grad(
      [](const std::vector<Tensor>& x) {
        Tensor a = num::sigmoid(x[0]);
        Tensor b = num::mul(x[0], x[0]);
        return num::sum(num::mul(a, b));
      },
      {random_real({4}, rng)});
  Tensor x = Tensor::parameter({1}, {3.0});
  num::backward(num::sum(num::add(x, x)));
  EXPECT_EQ(x.grad()[0], 2.0);
}

TEST(Backward, UnreachableLeafGetsZero) {
  Tensor x = Tensor::parameter({2}, {1.0, 2.0});
  Tensor y = Tensor::parameter({2}, {1.0, 2.0});
  num::backward(num::sum(x));
  EXPECT_EQ(y.grad(), (std::vector<double>{0.0, 0.0}));
}

TEST(Backward, RejectsNonScalarOrComplexLoss) {
  Tensor x = Tensor::parameter({2}, {1.0, 2.0});
  EXPECT_THROW(num::backward(num::relu(x)), semlink::UsageError);
  Tensor c = num::complex_exp_phase(x);
  EXPECT_THROW(num::backward(num::sum(c)), semlink::UsageError);
}

TEST(Backward, QuantizerPassesGradientThrough) {
  num::Rng rng(2);
  Tensor c0 = random_real({5}, rng, 0.0, 1.0);
  Tensor w = random_real({5}, rng);
  Tensor a = c0.clone().set_requires_grad(true);
  Tensor b = c0.clone().set_requires_grad(true);
  num::backward(num::sum(num::mul(num::quantize_st(a), w)));
  num::backward(num::sum(num::mul(b, w)));
  EXPECT_EQ(a.grad(), b.grad());
  const auto q = num::quantize_st(Tensor::real({2}, {0.7, 0.3})).to_vector();
  EXPECT_EQ(q, (std::vector<double>{1.0, 0.0}));
}

TEST(Backward, NonFiniteForwardIsRejected) {
  EXPECT_THROW(num::scale(Tensor::real({1}, {1e308}), 1e10), semlink::NumericError);
  EXPECT_THROW(num::log(Tensor::real({1}, {-1.0})), semlink::NumericError);
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  std::vector<std::int32_t> labels(4, 2);
  EXPECT_NEAR(num::cross_entropy(Tensor::zeros({4, 2, 2}), labels).item(), std::log(4.0), 1e-15);
  labels[0] = 4;
  EXPECT_THROW(num::cross_entropy(Tensor::zeros({4, 2, 2}), labels), semlink::UsageError);
}

TEST(Adam, ZeroGradientLeavesParams) {
  std::vector<double> w{1.0, -1.0};
  std::vector<double> g{0.0, 0.0};
  num::AdamState st;
  num::adam_step(w, g, st, {});
  EXPECT_EQ(w, (std::vector<double>{1.0, -1.0}));
}

TEST(Adam, DescendsQuadratic) {
  std::vector<double> w{1.0};
  num::AdamState st;
  num::AdamHyper hp;
  hp.lr = 0.1;
  std::vector<double> g{2.0 * w[0]};
  num::adam_step(w, g, st, hp);
  EXPECT_LT(w[0], 1.0);
}

TEST(Adam, MatchesScalarReferenceOn2dQuadratic) {
  // f(w) = w0^2 + 3 w1^2; the reference loop is written independently.
  Tensor w = Tensor::parameter({2}, {1.0, -1.5});
  num::AdamHyper hp;
  hp.lr = 0.05;
  num::Adam opt({w}, hp);
  double r[2] = {1.0, -1.5}, m[2] = {0, 0}, v[2] = {0, 0};
  const double coef[2] = {1.0, 3.0};
  for (int t = 1; t <= 200; ++t) {
    opt.zero_grad();
    num::backward(num::sum(num::mul(num::abs2(w), Tensor::real({2}, {1.0, 3.0}))));
    opt.step();
    for (int i = 0; i < 2; ++i) {
      const double g = 2.0 * coef[i] * r[i];
      m[i] = 0.9 * m[i] + 0.1 * g;
      v[i] = 0.999 * v[i] + 0.001 * g * g;
      const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
      r[i] -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  EXPECT_NEAR(w.at(0), r[0], 1e-12);
  EXPECT_NEAR(w.at(1), r[1], 1e-12);
  EXPECT_LT(std::hypot(w.at(0), w.at(1)), 1e-2);
}

TEST(Adam, ShapeMismatchThrows) {
  std::vector<double> w{1.0, 2.0}, g{1.0};
  num::AdamState st;
  EXPECT_THROW(num::adam_step(w, g, st, {}), semlink::DimensionError);
}

TEST(Rng, SplitStreamsAreIndependentOfParentDraws) {
  num::Rng a(42), b(42);
  for (int i = 0; i < 10; ++i) a();
  EXPECT_EQ(a.split("channel")(), b.split("channel")());
  EXPECT_NE(a.split("channel")(), a.split("dataset")());
}
