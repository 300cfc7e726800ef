// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "semlink/error.hpp"

namespace semlink::num {

enum class Dtype { real, complex };

using Shape = std::vector<std::size_t>;
using cplx = std::complex<double>;

std::size_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One record of the tape. Complex values and gradients are stored as
// interleaved (re, im) pairs; the gradient slot of a complex entry holds
// (dL/dRe, dL/dIm).
struct Node {
  Shape shape;
  Dtype dtype = Dtype::real;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
  bool is_leaf() const { return !backward; }
};

std::uint64_t next_seq();

}  // namespace detail

/// Shape-carrying real or complex array that may take part in a
/// reverse-mode graph. Copies are shallow: they share the same node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, Dtype dtype = Dtype::real);
  static Tensor filled(const Shape& shape, double value);
  static Tensor real(const Shape& shape, std::vector<double> values);
  static Tensor complex(const Shape& shape, const std::vector<cplx>& values);
  /// Raw storage constructor; `storage` has numel (real) or 2*numel (complex) slots.
  static Tensor from_storage(const Shape& shape, Dtype dtype, std::vector<double> storage);
  static Tensor scalar(double value);
  /// Trainable leaf.
  static Tensor parameter(const Shape& shape, std::vector<double> values);
  static Tensor eye(std::size_t n, Dtype dtype = Dtype::real);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const { return numel_of(shape()); }
  Dtype dtype() const;
  bool is_complex() const { return dtype() == Dtype::complex; }

  std::span<const double> storage() const;
  double item() const;
  double at(std::size_t i) const;
  cplx cat(std::size_t i) const;
  std::vector<double> to_vector() const;
  std::vector<cplx> to_complex_vector() const;

  bool requires_grad() const;
  bool is_leaf() const;
  Tensor& set_requires_grad(bool on);
  /// Accumulated gradient in storage layout; zeros if never reached.
  std::vector<double> grad() const;
  void zero_grad();

  /// Overwrites leaf values (optimizer updates); refuses graph-interior tensors.
  void assign(std::span<const double> storage);
  Tensor detach() const;
  Tensor clone() const;

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  const detail::Node& checked() const;
  std::shared_ptr<detail::Node> node_;
};

/// Whether new ops record themselves on the tape (per thread).
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Reverse sweep from a real scalar. Gradients accumulate into every
/// reachable leaf that requires grad; interior records are released
/// afterwards, so a graph can be walked only once.
void backward(const Tensor& loss);

namespace detail {

// Builds an op result, recording `inputs`/`bw` only when some input
// requires grad and recording is enabled. Non-finite output values raise
// NumericError naming `op`.
Tensor make_result(const char* op, Shape shape, Dtype dtype, std::vector<double> value,
                   std::vector<Tensor> inputs, std::function<void(Node&)> bw);

}  // namespace detail

}  // namespace semlink::num
