// SPDX-License-Identifier: Apache-2.0
// Element-wise ops and reductions.
#include <algorithm>
#include <memory>

#include "ops_internal.hpp"

namespace semlink::num {

using detail::Node;

namespace {

// For every element of `a`, the index of the element of `b` it pairs with.
// Returns nullptr when the shapes are identical.
std::shared_ptr<std::vector<std::size_t>> broadcast_map(const Shape& a, const Shape& b) {
  if (a == b) return nullptr;
  if (b.size() > a.size()) {
    throw DimensionError("cannot broadcast " + shape_str(b) + " to " + shape_str(a));
  }
  const std::size_t r = a.size();
  const std::size_t lead = r - b.size();
  std::vector<std::size_t> bstride(r, 0);
  std::size_t acc = 1;
  for (std::size_t i = r; i-- > lead;) {
    const std::size_t bd = b[i - lead];
    if (bd != a[i] && bd != 1) {
      throw DimensionError("cannot broadcast " + shape_str(b) + " to " + shape_str(a));
    }
    bstride[i] = bd == 1 ? 0 : acc;
    acc *= bd;
  }
  const std::size_t n = numel_of(a);
  auto map = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(r, 0);
  std::size_t off = 0;
  for (std::size_t o = 0; o < n; ++o) {
    (*map)[o] = off;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < a[i]) {
        off += bstride[i];
        break;
      }
      off -= bstride[i] * (a[i] - 1);
      idx[i] = 0;
    }
  }
  return map;
}

inline std::size_t bidx(const std::shared_ptr<std::vector<std::size_t>>& map, std::size_t i) {
  return map ? (*map)[i] : i;
}

enum class BinOp { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op, const char* name) {
  require_same_dtype(a, b, name);
  auto map = broadcast_map(a.shape(), b.shape());
  const auto av = a.storage();
  const auto bv = b.storage();
  const std::size_t n = a.numel();
  const bool cx = a.is_complex();
  std::vector<double> v(av.size());
  if (!cx) {
    for (std::size_t i = 0; i < n; ++i) {
      const double x = av[i], y = bv[bidx(map, i)];
      v[i] = op == BinOp::add ? x + y : op == BinOp::sub ? x - y : x * y;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = bidx(map, i);
      const double xr = av[2 * i], xi = av[2 * i + 1], yr = bv[2 * j], yi = bv[2 * j + 1];
      if (op == BinOp::mul) {
        v[2 * i] = xr * yr - xi * yi;
        v[2 * i + 1] = xr * yi + xi * yr;
      } else {
        const double s = op == BinOp::add ? 1.0 : -1.0;
        v[2 * i] = xr + s * yr;
        v[2 * i + 1] = xi + s * yi;
      }
    }
  }
  return detail::make_result(name, a.shape(), a.dtype(), std::move(v), {a, b},
                             [map, op, cx, n](Node& self) {
    const auto& g = self.grad;
    if (op != BinOp::mul) {
      const double s = op == BinOp::add ? 1.0 : -1.0;
      if (wants_grad(self, 0)) accumulate(in_grad(self, 0), g);
      if (wants_grad(self, 1)) {
        auto& gb = in_grad(self, 1);
        const std::size_t w = cx ? 2 : 1;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t c = 0; c < w; ++c) gb[bidx(map, i) * w + c] += s * g[i * w + c];
      }
      return;
    }
    const auto& av = in_value(self, 0);
    const auto& bv = in_value(self, 1);
    if (!cx) {
      if (wants_grad(self, 0)) {
        auto& ga = in_grad(self, 0);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * bv[bidx(map, i)];
      }
      if (wants_grad(self, 1)) {
        auto& gb = in_grad(self, 1);
        for (std::size_t i = 0; i < n; ++i) gb[bidx(map, i)] += g[i] * av[i];
      }
      return;
    }
    // c = a b: grad_a = g * conj(b), grad_b = g * conj(a)
    if (wants_grad(self, 0)) {
      auto& ga = in_grad(self, 0);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = bidx(map, i);
        const double gr = g[2 * i], gi = g[2 * i + 1], yr = bv[2 * j], yi = bv[2 * j + 1];
        ga[2 * i] += gr * yr + gi * yi;
        ga[2 * i + 1] += gi * yr - gr * yi;
      }
    }
    if (wants_grad(self, 1)) {
      auto& gb = in_grad(self, 1);
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = bidx(map, i);
        const double gr = g[2 * i], gi = g[2 * i + 1], xr = av[2 * i], xi = av[2 * i + 1];
        gb[2 * j] += gr * xr + gi * xi;
        gb[2 * j + 1] += gi * xr - gr * xi;
      }
    }
  });
}

template <class F, class D>
Tensor unary_real(const Tensor& x, const char* name, F f, D dfdx_from_xy) {
  require_real(x, name);
  const auto xv = x.storage();
  std::vector<double> v(xv.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(xv[i]);
  return detail::make_result(name, x.shape(), Dtype::real, std::move(v), {x},
                             [dfdx_from_xy](Node& self) {
                               if (!wants_grad(self, 0)) return;
                               auto& g = in_grad(self, 0);
                               const auto& xv = in_value(self, 0);
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 g[i] += self.grad[i] * dfdx_from_xy(xv[i], self.value[i]);
                             });
}

void require_scalar(const Tensor& s, const char* op) {
  if (s.is_complex() || s.numel() != 1) {
    throw DimensionError(std::string(op) + " needs a real single-element tensor as scale");
  }
}

// Reduction bookkeeping: maps each input element to its output slot.
struct Reduction {
  Shape out;
  std::shared_ptr<std::vector<std::size_t>> map;
  std::size_t count = 1;
};

Reduction make_reduction(const Shape& in, const std::vector<std::size_t>& axes) {
  const std::size_t r = in.size();
  std::vector<bool> red(r, false);
  for (auto ax : axes) {
    if (ax >= r) throw DimensionError("reduction axis " + std::to_string(ax) + " out of range for " +
                                      shape_str(in));
    red[ax] = true;
  }
  Reduction rd;
  std::vector<std::size_t> ostride(r, 0);
  std::size_t acc = 1;
  for (std::size_t i = r; i-- > 0;) {
    if (red[i]) {
      rd.count *= in[i];
    } else {
      ostride[i] = acc;
      acc *= in[i];
    }
  }
  for (std::size_t i = 0; i < r; ++i)
    if (!red[i]) rd.out.push_back(in[i]);
  const std::size_t n = numel_of(in);
  rd.map = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t o = 0; o < n; ++o) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < r; ++i) off += idx[i] * ostride[i];
    (*rd.map)[o] = off;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < in[i]) break;
      idx[i] = 0;
    }
  }
  return rd;
}

Tensor reduce_sum(const Tensor& a, const std::vector<std::size_t>& axes, double factor,
                  const char* name) {
  Reduction rd = make_reduction(a.shape(), axes);
  const std::size_t w = width(a.dtype());
  const auto av = a.storage();
  std::vector<double> v(numel_of(rd.out) * w, 0.0);
  const auto& map = *rd.map;
  for (std::size_t i = 0; i < map.size(); ++i)
    for (std::size_t c = 0; c < w; ++c) v[map[i] * w + c] += av[i * w + c];
  for (auto& x : v) x *= factor;
  auto m = rd.map;
  return detail::make_result(name, rd.out, a.dtype(), std::move(v), {a}, [m, w, factor](Node& self) {
    if (!wants_grad(self, 0)) return;
    auto& g = in_grad(self, 0);
    for (std::size_t i = 0; i < m->size(); ++i)
      for (std::size_t c = 0; c < w; ++c) g[i * w + c] += factor * self.grad[(*m)[i] * w + c];
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::mul, "mul"); }

Tensor scale(const Tensor& a, double s) {
  std::vector<double> v = a.to_vector();
  for (auto& x : v) x *= s;
  return detail::make_result("scale", a.shape(), a.dtype(), std::move(v), {a}, [s](Node& self) {
    if (!wants_grad(self, 0)) return;
    auto& g = in_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
  });
}

Tensor scale(const Tensor& a, const Tensor& s) {
  require_scalar(s, "scale");
  const double k = s.storage()[0];
  std::vector<double> v = a.to_vector();
  for (auto& x : v) x *= k;
  return detail::make_result("scale", a.shape(), a.dtype(), std::move(v), {a, s}, [](Node& self) {
    const double k = in_value(self, 1)[0];
    if (wants_grad(self, 0)) {
      auto& g = in_grad(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * self.grad[i];
    }
    if (wants_grad(self, 1)) {
      const auto& av = in_value(self, 0);
      double acc = 0.0;
      for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * self.grad[i];
      in_grad(self, 1)[0] += acc;
    }
  });
}

Tensor div(const Tensor& a, const Tensor& s) {
  require_scalar(s, "div");
  const double k = s.storage()[0];
  if (k == 0.0) throw NumericError("division by a zero scalar");
  std::vector<double> v = a.to_vector();
  for (auto& x : v) x /= k;
  return detail::make_result("div", a.shape(), a.dtype(), std::move(v), {a, s}, [](Node& self) {
    const double k = in_value(self, 1)[0];
    if (wants_grad(self, 0)) {
      auto& g = in_grad(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] / k;
    }
    if (wants_grad(self, 1)) {
      const auto& av = in_value(self, 0);
      double acc = 0.0;
      for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * self.grad[i];
      in_grad(self, 1)[0] -= acc / (k * k);
    }
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  require_real(a, "add_scalar");
  std::vector<double> v = a.to_vector();
  for (auto& x : v) x += s;
  return detail::make_result("add_scalar", a.shape(), Dtype::real, std::move(v), {a}, [](Node& self) {
    if (wants_grad(self, 0)) accumulate(in_grad(self, 0), self.grad);
  });
}

Tensor relu(const Tensor& x) {
  return unary_real(
      x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
      [](double xv, double) { return xv > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_real(
      x, "sigmoid",
      [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor log(const Tensor& x) {
  for (double v : x.storage())
    if (!(v > 0.0)) throw NumericError("log of a non-positive value");
  return unary_real(
      x, "log", [](double v) { return std::log(v); }, [](double xv, double) { return 1.0 / xv; });
}

Tensor sqrt(const Tensor& x) {
  for (double v : x.storage())
    if (v < 0.0) throw NumericError("sqrt of a negative value");
  return unary_real(
      x, "sqrt", [](double v) { return std::sqrt(v); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor reciprocal(const Tensor& x) {
  for (double v : x.storage())
    if (v == 0.0) throw NumericError("reciprocal of zero");
  return unary_real(
      x, "reciprocal", [](double v) { return 1.0 / v; }, [](double, double y) { return -y * y; });
}

Tensor to_complex(const Tensor& x) {
  require_real(x, "to_complex");
  const auto xv = x.storage();
  std::vector<double> v(2 * xv.size(), 0.0);
  for (std::size_t i = 0; i < xv.size(); ++i) v[2 * i] = xv[i];
  return detail::make_result("to_complex", x.shape(), Dtype::complex, std::move(v), {x}, [](Node& self) {
    if (!wants_grad(self, 0)) return;
    auto& g = in_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[2 * i];
  });
}

Tensor abs2(const Tensor& a) {
  const auto av = a.storage();
  const std::size_t n = a.numel();
  const bool cx = a.is_complex();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i)
    v[i] = cx ? av[2 * i] * av[2 * i] + av[2 * i + 1] * av[2 * i + 1] : av[i] * av[i];
  return detail::make_result("abs2", a.shape(), Dtype::real, std::move(v), {a}, [cx](Node& self) {
    if (!wants_grad(self, 0)) return;
    auto& g = in_grad(self, 0);
    const auto& av = in_value(self, 0);
    for (std::size_t i = 0; i < av.size(); ++i) g[i] += 2.0 * av[i] * self.grad[cx ? i / 2 : i];
  });
}

Tensor sum(const Tensor& a) {
  std::vector<std::size_t> axes(a.rank());
  for (std::size_t i = 0; i < axes.size(); ++i) axes[i] = i;
  return reduce_sum(a, axes, 1.0, "sum");
}

Tensor sum(const Tensor& a, const std::vector<std::size_t>& axes) {
  return reduce_sum(a, axes, 1.0, "sum");
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor mean(const Tensor& a, const std::vector<std::size_t>& axes) {
  std::size_t count = 1;
  for (auto ax : axes) count *= a.dim(ax);
  return reduce_sum(a, axes, 1.0 / static_cast<double>(count), "mean");
}

Tensor frobenius_norm(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.storage()) acc += x * x;
  const double nrm = std::sqrt(acc);
  return detail::make_result("frobenius_norm", {}, Dtype::real, {nrm}, {a}, [](Node& self) {
    if (!wants_grad(self, 0)) return;
    const double nrm = self.value[0];
    if (nrm == 0.0) return;
    auto& g = in_grad(self, 0);
    const auto& av = in_value(self, 0);
    const double k = self.grad[0] / nrm;
    for (std::size_t i = 0; i < av.size(); ++i) g[i] += k * av[i];
  });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  require_real(x, "softmax");
  const Shape& s = x.shape();
  if (axis >= s.size()) throw DimensionError("softmax axis out of range for " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  const auto xv = x.storage();
  std::vector<double> v(xv.size());
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      double mx = xv[base];
      for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, xv[base + k * inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < len; ++k) z += (v[base + k * inner] = std::exp(xv[base + k * inner] - mx));
      for (std::size_t k = 0; k < len; ++k) v[base + k * inner] /= z;
    }
  return detail::make_result("softmax", s, Dtype::real, std::move(v), {x},
                             [outer, inner, len](Node& self) {
                               if (!wants_grad(self, 0)) return;
                               auto& g = in_grad(self, 0);
                               const auto& y = self.value;
                               const auto& gy = self.grad;
                               for (std::size_t o = 0; o < outer; ++o)
                                 for (std::size_t in = 0; in < inner; ++in) {
                                   const std::size_t base = o * len * inner + in;
                                   double dot = 0.0;
                                   for (std::size_t k = 0; k < len; ++k)
                                     dot += gy[base + k * inner] * y[base + k * inner];
                                   for (std::size_t k = 0; k < len; ++k) {
                                     const std::size_t j = base + k * inner;
                                     g[j] += y[j] * (gy[j] - dot);
                                   }
                                 }
                             });
}

Tensor layer_norm(const Tensor& x, double eps) {
  require_real(x, "layer_norm");
  if (x.rank() == 0) throw DimensionError("layer_norm needs rank >= 1");
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  const auto xv = x.storage();
  std::vector<double> v(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* p = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += p[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (p[j] - mu) * (p[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) v[r * d + j] = (p[j] - mu) * is;
  }
  return detail::make_result("layer_norm", x.shape(), Dtype::real, std::move(v), {x},
                             [inv_std, rows, d](Node& self) {
                               if (!wants_grad(self, 0)) return;
                               auto& g = in_grad(self, 0);
                               const auto& xh = self.value;
                               const auto& gy = self.grad;
                               const double inv_d = 1.0 / static_cast<double>(d);
                               for (std::size_t r = 0; r < rows; ++r) {
                                 double mg = 0.0, mgx = 0.0;
                                 for (std::size_t j = 0; j < d; ++j) {
                                   mg += gy[r * d + j];
                                   mgx += gy[r * d + j] * xh[r * d + j];
                                 }
                                 mg *= inv_d;
                                 mgx *= inv_d;
                                 for (std::size_t j = 0; j < d; ++j) {
                                   const std::size_t k = r * d + j;
                                   g[k] += (*inv_std)[r] * (gy[k] - mg - xh[k] * mgx);
                                 }
                               }
                             });
}

}  // namespace semlink::num
