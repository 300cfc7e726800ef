// SPDX-License-Identifier: Apache-2.0
// Shape manipulation and real/complex reinterpretation ops.
#include <numeric>

#include "ops_internal.hpp"

namespace semlink::num {

using detail::Node;

Tensor reshape(const Tensor& a, const Shape& shape) {
  if (numel_of(shape) != a.numel()) {
    throw DimensionError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  return detail::make_result("reshape", shape, a.dtype(), a.to_vector(), {a}, [](Node& self) {
    if (!wants_grad(self, 0)) return;
    accumulate(in_grad(self, 0), self.grad);
  });
}

Tensor flatten(const Tensor& a) { return reshape(a, {a.numel()}); }

Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes) {
  const Shape& in = a.shape();
  const std::size_t r = in.size();
  if (axes.size() != r) throw DimensionError("permute: axes count does not match rank");
  std::vector<bool> used(r, false);
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (axes[i] >= r || used[axes[i]]) throw DimensionError("permute: invalid axis list");
    used[axes[i]] = true;
    out[i] = in[axes[i]];
  }
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * in[i];

  const std::size_t n = a.numel();
  const std::size_t w = width(a.dtype());
  auto src = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t o = 0; o < n; ++o) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < r; ++i) off += idx[i] * in_strides[axes[i]];
    (*src)[o] = off;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out[i]) break;
      idx[i] = 0;
    }
  }
  const auto av = a.storage();
  std::vector<double> v(n * w);
  for (std::size_t o = 0; o < n; ++o)
    for (std::size_t c = 0; c < w; ++c) v[o * w + c] = av[(*src)[o] * w + c];

  return detail::make_result("permute", out, a.dtype(), std::move(v), {a}, [src, w](Node& self) {
    if (!wants_grad(self, 0)) return;
    auto& g = in_grad(self, 0);
    for (std::size_t o = 0; o < src->size(); ++o)
      for (std::size_t c = 0; c < w; ++c) g[(*src)[o] * w + c] += self.grad[o * w + c];
  });
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rank();
  if (r < 2) throw DimensionError("transpose needs rank >= 2, got " + shape_str(a.shape()));
  std::vector<std::size_t> axes(r);
  std::iota(axes.begin(), axes.end(), 0);
  std::swap(axes[r - 1], axes[r - 2]);
  return permute(a, axes);
}

Tensor conj(const Tensor& a) {
  if (!a.is_complex()) return a;
  std::vector<double> v = a.to_vector();
  for (std::size_t i = 1; i < v.size(); i += 2) v[i] = -v[i];
  return detail::make_result("conj", a.shape(), Dtype::complex, std::move(v), {a}, [](Node& self) {
    if (!wants_grad(self, 0)) return;
    auto& g = in_grad(self, 0);
    for (std::size_t i = 0; i < g.size(); i += 2) {
      g[i] += self.grad[i];
      g[i + 1] -= self.grad[i + 1];
    }
  });
}

Tensor hermitian(const Tensor& a) { return conj(transpose(a)); }

Tensor concat(const std::vector<Tensor>& xs, std::size_t axis) {
  if (xs.empty()) throw DimensionError("concat of an empty list");
  const Shape& s0 = xs[0].shape();
  if (axis >= s0.size()) throw DimensionError("concat axis out of range for " + shape_str(s0));
  const Dtype dt = xs[0].dtype();
  Shape out = s0;
  out[axis] = 0;
  for (const auto& x : xs) {
    if (x.dtype() != dt) throw DtypeError("concat of mixed dtypes");
    const Shape& s = x.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == s0[i];
    if (!ok) throw DimensionError("concat: " + shape_str(s) + " vs " + shape_str(s0));
    out[axis] += s[axis];
  }
  const std::size_t w = width(dt);
  std::size_t outer = 1, inner = w;
  for (std::size_t i = 0; i < axis; ++i) outer *= s0[i];
  for (std::size_t i = axis + 1; i < s0.size(); ++i) inner *= s0[i];

  std::vector<std::size_t> chunk(xs.size());
  for (std::size_t j = 0; j < xs.size(); ++j) chunk[j] = xs[j].shape()[axis] * inner;
  const std::size_t row = out[axis] * inner;
  std::vector<double> v(outer * row);
  std::size_t col = 0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const auto xv = xs[j].storage();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(xv.begin() + o * chunk[j], chunk[j], v.begin() + o * row + col);
    col += chunk[j];
  }
  return detail::make_result("concat", out, dt, std::move(v), xs, [chunk, outer, row](Node& self) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < chunk.size(); ++j) {
      if (wants_grad(self, j)) {
        auto& g = in_grad(self, j);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < chunk[j]; ++i) g[o * chunk[j] + i] += self.grad[o * row + c + i];
      }
      c += chunk[j];
    }
  });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = a.shape();
  if (axis >= s.size() || start + length > s[axis] || length == 0) {
    throw DimensionError("slice [" + std::to_string(start) + ", +" + std::to_string(length) +
                         ") on axis " + std::to_string(axis) + " of " + shape_str(s));
  }
  const std::size_t w = width(a.dtype());
  std::size_t outer = 1, inner = w;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  Shape out = s;
  out[axis] = length;
  const std::size_t in_row = s[axis] * inner, out_row = length * inner, off = start * inner;
  const auto av = a.storage();
  std::vector<double> v(outer * out_row);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(av.begin() + o * in_row + off, out_row, v.begin() + o * out_row);
  return detail::make_result("slice", out, a.dtype(), std::move(v), {a},
                             [outer, in_row, out_row, off](Node& self) {
                               if (!wants_grad(self, 0)) return;
                               auto& g = in_grad(self, 0);
                               for (std::size_t o = 0; o < outer; ++o)
                                 for (std::size_t i = 0; i < out_row; ++i)
                                   g[o * in_row + off + i] += self.grad[o * out_row + i];
                             });
}

Tensor as_complex(const Tensor& a) {
  require_real(a, "as_complex");
  const Shape& s = a.shape();
  if (s.empty() || s.back() != 2) throw DimensionError("as_complex needs a trailing axis of 2");
  Shape out(s.begin(), s.end() - 1);
  return detail::make_result("as_complex", out, Dtype::complex, a.to_vector(), {a}, [](Node& self) {
    if (wants_grad(self, 0)) accumulate(in_grad(self, 0), self.grad);
  });
}

Tensor as_real(const Tensor& a) {
  require_complex(a, "as_real");
  Shape out = a.shape();
  out.push_back(2);
  return detail::make_result("as_real", out, Dtype::real, a.to_vector(), {a}, [](Node& self) {
    if (wants_grad(self, 0)) accumulate(in_grad(self, 0), self.grad);
  });
}

Tensor split_re_im(const Tensor& a) {
  require_complex(a, "split_re_im");
  const Shape& s = a.shape();
  if (s.empty()) throw DimensionError("split_re_im needs rank >= 1");
  const std::size_t n = s.back();
  const std::size_t rows = a.numel() / n;
  Shape out = s;
  out.back() = 2 * n;
  const auto av = a.storage();
  std::vector<double> v(rows * 2 * n);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) {
      v[r * 2 * n + j] = av[2 * (r * n + j)];
      v[r * 2 * n + n + j] = av[2 * (r * n + j) + 1];
    }
  return detail::make_result("split_re_im", out, Dtype::real, std::move(v), {a},
                             [rows, n](Node& self) {
                               if (!wants_grad(self, 0)) return;
                               auto& g = in_grad(self, 0);
                               for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t j = 0; j < n; ++j) {
                                   g[2 * (r * n + j)] += self.grad[r * 2 * n + j];
                                   g[2 * (r * n + j) + 1] += self.grad[r * 2 * n + n + j];
                                 }
                             });
}

Tensor merge_re_im(const Tensor& a) {
  require_real(a, "merge_re_im");
  const Shape& s = a.shape();
  if (s.empty() || s.back() % 2 != 0) throw DimensionError("merge_re_im needs an even last axis");
  const std::size_t n = s.back() / 2;
  const std::size_t rows = a.numel() / (2 * n);
  Shape out = s;
  out.back() = n;
  const auto av = a.storage();
  std::vector<double> v(rows * 2 * n);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < n; ++j) {
      v[2 * (r * n + j)] = av[r * 2 * n + j];
      v[2 * (r * n + j) + 1] = av[r * 2 * n + n + j];
    }
  return detail::make_result("merge_re_im", out, Dtype::complex, std::move(v), {a},
                             [rows, n](Node& self) {
                               if (!wants_grad(self, 0)) return;
                               auto& g = in_grad(self, 0);
                               for (std::size_t r = 0; r < rows; ++r)
                                 for (std::size_t j = 0; j < n; ++j) {
                                   g[r * 2 * n + j] += self.grad[2 * (r * n + j)];
                                   g[r * 2 * n + n + j] += self.grad[2 * (r * n + j) + 1];
                                 }
                             });
}

Tensor complex_exp_phase(const Tensor& theta) {
  if (theta.is_complex()) throw DtypeError("complex_exp_phase needs a real phase tensor");
  const auto tv = theta.storage();
  std::vector<double> v(2 * tv.size());
  for (std::size_t i = 0; i < tv.size(); ++i) {
    v[2 * i] = std::cos(tv[i]);
    v[2 * i + 1] = std::sin(tv[i]);
  }
  return detail::make_result("complex_exp_phase", theta.shape(), Dtype::complex, std::move(v), {theta},
                             [](Node& self) {
                               if (!wants_grad(self, 0)) return;
                               auto& g = in_grad(self, 0);
                               // d(cos)/dθ = -sin = -Im(out), d(sin)/dθ = cos = Re(out)
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 g[i] += -self.value[2 * i + 1] * self.grad[2 * i] +
                                         self.value[2 * i] * self.grad[2 * i + 1];
                             });
}

}  // namespace semlink::num
