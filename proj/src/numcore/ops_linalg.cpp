// SPDX-License-Identifier: Apache-2.0
// Matrix products, HPD log-determinant and the convolution kernels.
#include <algorithm>
#include <memory>

#include "ops_internal.hpp"

namespace semlink::num {

using detail::Node;

namespace {

struct MatmulDims {
  std::size_t batch = 1, m = 0, k = 0, n = 0;
  bool a_batched = false, b_batched = false;
};

MatmulDims matmul_dims(const Shape& a, const Shape& b) {
  auto bad = [&] { return DimensionError("matmul " + shape_str(a) + " x " + shape_str(b)); };
  if (a.size() < 2 || a.size() > 3 || b.size() < 2 || b.size() > 3) throw bad();
  MatmulDims d;
  d.a_batched = a.size() == 3;
  d.b_batched = b.size() == 3;
  d.m = a[a.size() - 2];
  d.k = a.back();
  if (b[b.size() - 2] != d.k) throw bad();
  d.n = b.back();
  if (d.a_batched && d.b_batched && a[0] != b[0]) throw bad();
  d.batch = d.a_batched ? a[0] : (d.b_batched ? b[0] : 1);
  return d;
}

// C[m,n] += A[m,k] B[k,n]
void gemm_nn(const double* A, const double* B, double* C, std::size_t m, std::size_t k, std::size_t n,
             bool cx) {
  if (!cx) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double a = A[i * k + p];
        const double* brow = B + p * n;
        double* crow = C + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += a * brow[j];
      }
    return;
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double ar = A[2 * (i * k + p)], ai = A[2 * (i * k + p) + 1];
      const double* brow = B + 2 * p * n;
      double* crow = C + 2 * i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double br = brow[2 * j], bi = brow[2 * j + 1];
        crow[2 * j] += ar * br - ai * bi;
        crow[2 * j + 1] += ar * bi + ai * br;
      }
    }
}

// gA[m,k] += G[m,n] conj(B[k,n])^T
void gemm_grad_a(const double* G, const double* B, double* GA, std::size_t m, std::size_t k,
                 std::size_t n, bool cx) {
  if (!cx) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        double acc = 0.0;
        const double* grow = G + i * n;
        const double* brow = B + p * n;
        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
        GA[i * k + p] += acc;
      }
    return;
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      double re = 0.0, im = 0.0;
      const double* grow = G + 2 * i * n;
      const double* brow = B + 2 * p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double gr = grow[2 * j], gi = grow[2 * j + 1], br = brow[2 * j], bi = brow[2 * j + 1];
        re += gr * br + gi * bi;
        im += gi * br - gr * bi;
      }
      GA[2 * (i * k + p)] += re;
      GA[2 * (i * k + p) + 1] += im;
    }
}

// gB[k,n] += conj(A[m,k])^T G[m,n]
void gemm_grad_b(const double* A, const double* G, double* GB, std::size_t m, std::size_t k,
                 std::size_t n, bool cx) {
  if (!cx) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double a = A[i * k + p];
        const double* grow = G + i * n;
        double* out = GB + p * n;
        for (std::size_t j = 0; j < n; ++j) out[j] += a * grow[j];
      }
    return;
  }
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double ar = A[2 * (i * k + p)], ai = A[2 * (i * k + p) + 1];
      const double* grow = G + 2 * i * n;
      double* out = GB + 2 * p * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double gr = grow[2 * j], gi = grow[2 * j + 1];
        out[2 * j] += ar * gr + ai * gi;
        out[2 * j + 1] += ar * gi - ai * gr;
      }
    }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_same_dtype(a, b, "matmul");
  const MatmulDims d = matmul_dims(a.shape(), b.shape());
  const bool cx = a.is_complex();
  const std::size_t w = width(a.dtype());
  const std::size_t sa = d.a_batched ? d.m * d.k * w : 0;
  const std::size_t sb = d.b_batched ? d.k * d.n * w : 0;
  const std::size_t sc = d.m * d.n * w;
  std::vector<double> v(d.batch * sc, 0.0);
  const double* av = a.storage().data();
  const double* bv = b.storage().data();
  for (std::size_t t = 0; t < d.batch; ++t) gemm_nn(av + t * sa, bv + t * sb, v.data() + t * sc, d.m, d.k, d.n, cx);
  Shape out = (d.a_batched || d.b_batched) ? Shape{d.batch, d.m, d.n} : Shape{d.m, d.n};
  return detail::make_result("matmul", out, a.dtype(), std::move(v), {a, b},
                             [d, cx, sa, sb, sc](Node& self) {
                               const double* g = self.grad.data();
                               const double* av = in_value(self, 0).data();
                               const double* bv = in_value(self, 1).data();
                               if (wants_grad(self, 0)) {
                                 double* ga = in_grad(self, 0).data();
                                 for (std::size_t t = 0; t < d.batch; ++t)
                                   gemm_grad_a(g + t * sc, bv + t * sb, ga + t * sa, d.m, d.k, d.n, cx);
                               }
                               if (wants_grad(self, 1)) {
                                 double* gb = in_grad(self, 1).data();
                                 for (std::size_t t = 0; t < d.batch; ++t)
                                   gemm_grad_b(av + t * sa, g + t * sc, gb + t * sb, d.m, d.k, d.n, cx);
                               }
                             });
}

Tensor logdet_hpd(const Tensor& a) {
  const Shape& s = a.shape();
  if (s.size() < 2 || s[s.size() - 1] != s[s.size() - 2]) {
    throw DimensionError("logdet_hpd needs square matrices, got " + shape_str(s));
  }
  const std::size_t n = s.back();
  if (n == 0 || n > 8) throw DimensionError("logdet_hpd supports 1..8 square matrices");
  const std::size_t batch = a.numel() / (n * n);
  const bool cx = a.is_complex();
  const auto av = a.storage();
  Shape out(s.begin(), s.end() - 2);

  std::vector<double> v(batch);
  // (A^{-1})^H per matrix, the real-pair gradient of log det.
  auto ginv = std::make_shared<std::vector<cplx>>(batch * n * n);
  std::vector<cplx> A(n * n), L(n * n), Li(n * n);
  for (std::size_t t = 0; t < batch; ++t) {
    for (std::size_t i = 0; i < n * n; ++i)
      A[i] = cx ? cplx(av[2 * (t * n * n + i)], av[2 * (t * n * n + i) + 1]) : cplx(av[t * n * n + i], 0.0);
    std::fill(L.begin(), L.end(), cplx(0.0));
    double ld = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double dj = A[j * n + j].real();
      for (std::size_t k = 0; k < j; ++k) dj -= std::norm(L[j * n + k]);
      if (!(dj > 0.0)) {
        throw NumericError("logdet_hpd: non-positive pivot " + std::to_string(dj) + " at diagonal entry (" +
                           std::to_string(j) + "," + std::to_string(j) + ") of matrix " + std::to_string(t));
      }
      const double ljj = std::sqrt(dj);
      L[j * n + j] = ljj;
      ld += 2.0 * std::log(ljj);
      for (std::size_t i = j + 1; i < n; ++i) {
        cplx acc = A[i * n + j];
        for (std::size_t k = 0; k < j; ++k) acc -= L[i * n + k] * std::conj(L[j * n + k]);
        L[i * n + j] = acc / ljj;
      }
    }
    v[t] = ld;
    // L^{-1} by forward substitution, then A^{-1} = L^{-H} L^{-1}.
    std::fill(Li.begin(), Li.end(), cplx(0.0));
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t i = c; i < n; ++i) {
        cplx acc = i == c ? cplx(1.0) : cplx(0.0);
        for (std::size_t k = c; k < i; ++k) acc -= L[i * n + k] * Li[k * n + c];
        Li[i * n + c] = acc / L[i * n + i];
      }
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        cplx acc = 0.0;
        for (std::size_t k = std::max(i, j); k < n; ++k) acc += std::conj(Li[k * n + i]) * Li[k * n + j];
        // stored as conj(inv[j][i]) == (A^{-1})^H[i][j]
        (*ginv)[t * n * n + j * n + i] = std::conj(acc);
      }
  }
  return detail::make_result("logdet_hpd", out, Dtype::real, std::move(v), {a},
                             [ginv, n, batch, cx](Node& self) {
                               if (!wants_grad(self, 0)) return;
                               auto& g = in_grad(self, 0);
                               for (std::size_t t = 0; t < batch; ++t)
                                 for (std::size_t i = 0; i < n * n; ++i) {
                                   const cplx gi = (*ginv)[t * n * n + i] * self.grad[t];
                                   if (cx) {
                                     g[2 * (t * n * n + i)] += gi.real();
                                     g[2 * (t * n * n + i) + 1] += gi.imag();
                                   } else {
                                     g[t * n * n + i] += gi.real();
                                   }
                                 }
                             });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
  require_real(x, "conv2d");
  require_real(w, "conv2d");
  require_real(b, "conv2d");
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 3 || ws.size() != 4 || ws[1] != xs[0] || ws[2] != ws[3] || b.numel() != ws[0] ||
      stride == 0 || xs[1] + 2 * pad < ws[2] || xs[2] + 2 * pad < ws[3]) {
    throw DimensionError("conv2d input " + shape_str(xs) + " weight " + shape_str(ws) + " bias " +
                         shape_str(b.shape()));
  }
  const std::size_t cin = xs[0], H = xs[1], W = xs[2], cout = ws[0], ks = ws[2];
  const std::size_t Ho = (H + 2 * pad - ks) / stride + 1, Wo = (W + 2 * pad - ks) / stride + 1;

  struct Geo {
    std::size_t cin, H, W, cout, ks, Ho, Wo, stride, pad;
    // valid output range [lo, hi) along one axis for kernel tap `k`
    void range(std::size_t k, std::size_t in, std::size_t outn, std::size_t& lo, std::size_t& hi) const {
      // need o*stride + k - pad in [0, in)
      lo = k >= pad ? 0 : (pad - k + stride - 1) / stride;
      const long long top = static_cast<long long>(in) - 1 + static_cast<long long>(pad) - static_cast<long long>(k);
      hi = top < 0 ? 0 : std::min<std::size_t>(outn, static_cast<std::size_t>(top) / stride + 1);
      if (hi < lo) hi = lo;
    }
  };
  const Geo geo{cin, H, W, cout, ks, Ho, Wo, stride, pad};

  const double* xv = x.storage().data();
  const double* wv = w.storage().data();
  const double* bv = b.storage().data();
  std::vector<double> v(cout * Ho * Wo);
  for (std::size_t co = 0; co < cout; ++co) {
    double* o = v.data() + co * Ho * Wo;
    std::fill(o, o + Ho * Wo, bv[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double* xc = xv + ci * H * W;
      for (std::size_t ky = 0; ky < ks; ++ky) {
        std::size_t ylo, yhi;
        geo.range(ky, H, Ho, ylo, yhi);
        for (std::size_t kx = 0; kx < ks; ++kx) {
          std::size_t xlo, xhi;
          geo.range(kx, W, Wo, xlo, xhi);
          const double wk = wv[((co * cin + ci) * ks + ky) * ks + kx];
          for (std::size_t oy = ylo; oy < yhi; ++oy) {
            const double* xrow = xc + (oy * stride + ky - pad) * W + kx - pad;
            double* orow = o + oy * Wo;
            for (std::size_t ox = xlo; ox < xhi; ++ox) orow[ox] += wk * xrow[ox * stride];
          }
        }
      }
    }
  }
  return detail::make_result("conv2d", {cout, Ho, Wo}, Dtype::real, std::move(v), {x, w, b}, [geo](Node& self) {
    const auto& G = geo;
    const double* g = self.grad.data();
    const double* xv = in_value(self, 0).data();
    const double* wv = in_value(self, 1).data();
    const bool gx_on = wants_grad(self, 0), gw_on = wants_grad(self, 1);
    double* gx = gx_on ? in_grad(self, 0).data() : nullptr;
    double* gw = gw_on ? in_grad(self, 1).data() : nullptr;
    if (wants_grad(self, 2)) {
      auto& gb = in_grad(self, 2);
      for (std::size_t co = 0; co < G.cout; ++co) {
        double acc = 0.0;
        for (std::size_t i = 0; i < G.Ho * G.Wo; ++i) acc += g[co * G.Ho * G.Wo + i];
        gb[co] += acc;
      }
    }
    if (!gx_on && !gw_on) return;
    for (std::size_t co = 0; co < G.cout; ++co) {
      const double* go = g + co * G.Ho * G.Wo;
      for (std::size_t ci = 0; ci < G.cin; ++ci) {
        const double* xc = xv + ci * G.H * G.W;
        double* gxc = gx ? gx + ci * G.H * G.W : nullptr;
        for (std::size_t ky = 0; ky < G.ks; ++ky) {
          std::size_t ylo, yhi;
          G.range(ky, G.H, G.Ho, ylo, yhi);
          for (std::size_t kx = 0; kx < G.ks; ++kx) {
            std::size_t xlo, xhi;
            G.range(kx, G.W, G.Wo, xlo, xhi);
            const std::size_t widx = ((co * G.cin + ci) * G.ks + ky) * G.ks + kx;
            const double wk = wv[widx];
            double acc = 0.0;
            for (std::size_t oy = ylo; oy < yhi; ++oy) {
              const std::size_t xoff = (oy * G.stride + ky - G.pad) * G.W + kx - G.pad;
              const double* grow = go + oy * G.Wo;
              const double* xrow = xc + xoff;
              if (gw) {
                for (std::size_t ox = xlo; ox < xhi; ++ox) acc += grow[ox] * xrow[ox * G.stride];
              }
              if (gxc) {
                double* gxrow = gxc + xoff;
                for (std::size_t ox = xlo; ox < xhi; ++ox) gxrow[ox * G.stride] += wk * grow[ox];
              }
            }
            if (gw) gw[widx] += acc;
          }
        }
      }
    }
  });
}

Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
  require_real(x, "upsample_nearest");
  const Shape& s = x.shape();
  if (s.size() != 3 || factor == 0) throw DimensionError("upsample_nearest needs [C,H,W], got " + shape_str(s));
  const std::size_t C = s[0], H = s[1], W = s[2], Ho = H * factor, Wo = W * factor;
  const auto xv = x.storage();
  std::vector<double> v(C * Ho * Wo);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < Ho; ++y)
      for (std::size_t xx = 0; xx < Wo; ++xx) v[(c * Ho + y) * Wo + xx] = xv[(c * H + y / factor) * W + xx / factor];
  return detail::make_result("upsample_nearest", {C, Ho, Wo}, Dtype::real, std::move(v), {x},
                             [C, H, W, Ho, Wo, factor](Node& self) {
                               if (!wants_grad(self, 0)) return;
                               auto& g = in_grad(self, 0);
                               for (std::size_t c = 0; c < C; ++c)
                                 for (std::size_t y = 0; y < Ho; ++y)
                                   for (std::size_t xx = 0; xx < Wo; ++xx)
                                     g[(c * H + y / factor) * W + xx / factor] += self.grad[(c * Ho + y) * Wo + xx];
                             });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels) {
  require_real(logits, "cross_entropy");
  const Shape& s = logits.shape();
  if (s.size() != 3) throw DimensionError("cross_entropy needs logits [C,H,W], got " + shape_str(s));
  const std::size_t C = s[0], P = s[1] * s[2];
  if (labels.size() != P) throw DimensionError("cross_entropy: label count does not match H*W");
  auto lab = std::make_shared<std::vector<std::int32_t>>(labels.begin(), labels.end());
  for (auto l : *lab) {
    if (l < 0 || static_cast<std::size_t>(l) >= C) {
      throw UsageError("label " + std::to_string(l) + " out of range for " + std::to_string(C) + " classes");
    }
  }
  const double* z = logits.storage().data();
  auto prob = std::make_shared<std::vector<double>>(C * P);
  double loss = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    double mx = z[p];
    for (std::size_t c = 1; c < C; ++c) mx = std::max(mx, z[c * P + p]);
    double sumexp = 0.0;
    for (std::size_t c = 0; c < C; ++c) sumexp += ((*prob)[c * P + p] = std::exp(z[c * P + p] - mx));
    for (std::size_t c = 0; c < C; ++c) (*prob)[c * P + p] /= sumexp;
    loss += mx + std::log(sumexp) - z[static_cast<std::size_t>((*lab)[p]) * P + p];
  }
  loss /= static_cast<double>(P);
  return detail::make_result("cross_entropy", {}, Dtype::real, {loss}, {logits}, [prob, lab, C, P](Node& self) {
    if (!wants_grad(self, 0)) return;
    auto& g = in_grad(self, 0);
    const double k = self.grad[0] / static_cast<double>(P);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < P; ++p) {
        const double onehot = static_cast<std::size_t>((*lab)[p]) == c ? 1.0 : 0.0;
        g[c * P + p] += k * ((*prob)[c * P + p] - onehot);
      }
  });
}

Tensor quantize_st(const Tensor& c) {
  require_real(c, "quantize_st");
  std::vector<double> v = c.to_vector();
  for (auto& x : v) x = x >= 0.5 ? 1.0 : 0.0;
  return detail::make_result("quantize_st", c.shape(), Dtype::real, std::move(v), {c}, [](Node& self) {
    if (wants_grad(self, 0)) accumulate(in_grad(self, 0), self.grad);
  });
}

}  // namespace semlink::num
