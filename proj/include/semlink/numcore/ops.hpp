// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semlink/numcore/tensor.hpp"

// Differentiable operations on Tensor. Every op has a backward rule; complex
// inputs use the real-pair convention (independent gradients for the real
// and imaginary parts), which is exact because all trainable parameters are
// real.
namespace semlink::num {

// ---- shape manipulation -------------------------------------------------
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor flatten(const Tensor& a);
/// General axis permutation.
Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes);
/// Swaps the last two axes (batched matrix transpose).
Tensor transpose(const Tensor& a);
Tensor conj(const Tensor& a);
/// Conjugate transpose of the last two axes.
Tensor hermitian(const Tensor& a);
Tensor concat(const std::vector<Tensor>& xs, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);

// ---- real <-> complex ---------------------------------------------------
/// real [..., 2] -> complex [...].
Tensor as_complex(const Tensor& a);
/// complex [...] -> real [..., 2].
Tensor as_real(const Tensor& a);
/// complex [..., n] -> real [..., 2n] laid out as [Re | Im].
Tensor split_re_im(const Tensor& a);
/// real [..., 2n] laid out as [Re | Im] -> complex [..., n].
Tensor merge_re_im(const Tensor& a);
/// Entry-wise cos(theta) + j sin(theta) of a real tensor.
Tensor complex_exp_phase(const Tensor& theta);

// ---- element-wise -------------------------------------------------------
// Binary ops broadcast `b` against `a` (right-aligned, size-1 axes stretch);
// the result always has the shape of `a`. Both operands share a dtype.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// Multiplies (real or complex) `a` by a real single-element tensor.
Tensor scale(const Tensor& a, const Tensor& s);
/// Divides by a real single-element tensor.
Tensor div(const Tensor& a, const Tensor& s);
Tensor add_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
Tensor reciprocal(const Tensor& x);
/// Real tensor promoted to complex with zero imaginary part.
Tensor to_complex(const Tensor& x);
/// |a|^2 entry-wise; real result.
Tensor abs2(const Tensor& a);

// ---- reductions ---------------------------------------------------------
Tensor sum(const Tensor& a);
Tensor sum(const Tensor& a, const std::vector<std::size_t>& axes);
Tensor mean(const Tensor& a);
Tensor mean(const Tensor& a, const std::vector<std::size_t>& axes);
/// Real scalar sqrt(sum |a|^2).
Tensor frobenius_norm(const Tensor& a);
Tensor softmax(const Tensor& x, std::size_t axis);
/// Normalizes over the last axis to zero mean / unit variance (no affine).
Tensor layer_norm(const Tensor& x, double eps = 1e-5);

// ---- linear algebra -----------------------------------------------------
/// Matrix product on the last two axes. Either operand may carry one
/// leading batch axis; a 2-D operand is broadcast across the batch.
Tensor matmul(const Tensor& a, const Tensor& b);
/// Natural-log determinant of Hermitian positive-definite [..., n, n]
/// matrices (n <= 8); real result of shape [...].
Tensor logdet_hpd(const Tensor& a);

// ---- neural-network kernels --------------------------------------------
/// x [Cin,H,W], w [Cout,Cin,k,k], b [Cout] -> [Cout,H',W'].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
              std::size_t pad);
/// Nearest-neighbour upsampling of [C,H,W] by an integer factor.
Tensor upsample_nearest(const Tensor& x, std::size_t factor);
/// Pixel-mean cross entropy of logits [C,H,W] against integer labels [H*W].
Tensor cross_entropy(const Tensor& logits, std::span<const std::int32_t> labels);
/// Hard threshold at 0.5 in the forward pass, identity in the backward pass.
Tensor quantize_st(const Tensor& c);

}  // namespace semlink::num
