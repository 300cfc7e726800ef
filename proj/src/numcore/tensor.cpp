// SPDX-License-Identifier: Apache-2.0
#include "semlink/numcore/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace semlink::num {

std::size_t numel_of(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

namespace detail {

std::uint64_t next_seq() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

namespace {
thread_local bool g_grad_enabled = true;

std::shared_ptr<Node> new_node(Shape shape, Dtype dtype, std::vector<double> value) {
  auto n = std::make_shared<Node>();
  const std::size_t slots = numel_of(shape) * (dtype == Dtype::complex ? 2 : 1);
  if (value.size() != slots) {
    throw DimensionError("tensor storage has " + std::to_string(value.size()) + " slots, shape " +
                         shape_str(shape) + " needs " + std::to_string(slots));
  }
  n->shape = std::move(shape);
  n->dtype = dtype;
  n->value = std::move(value);
  n->seq = next_seq();
  return n;
}
}  // namespace

Tensor make_result(const char* op, Shape shape, Dtype dtype, std::vector<double> value,
                   std::vector<Tensor> inputs, std::function<void(Node&)> bw) {
  for (double v : value) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
  auto node = new_node(std::move(shape), dtype, std::move(value));
  if (g_grad_enabled) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.defined() && t.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (auto& t : inputs) node->inputs.push_back(t.node());
      node->backward = std::move(bw);
    }
  }
  return Tensor(std::move(node));
}

}  // namespace detail

bool grad_enabled() { return detail::g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(detail::g_grad_enabled) { detail::g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { detail::g_grad_enabled = previous_; }

Tensor Tensor::from_storage(const Shape& shape, Dtype dtype, std::vector<double> storage) {
  return Tensor(detail::new_node(shape, dtype, std::move(storage)));
}

Tensor Tensor::zeros(const Shape& shape, Dtype dtype) {
  return from_storage(shape, dtype,
                      std::vector<double>(numel_of(shape) * (dtype == Dtype::complex ? 2 : 1), 0.0));
}

Tensor Tensor::filled(const Shape& shape, double value) {
  return from_storage(shape, Dtype::real, std::vector<double>(numel_of(shape), value));
}

Tensor Tensor::real(const Shape& shape, std::vector<double> values) {
  return from_storage(shape, Dtype::real, std::move(values));
}

Tensor Tensor::complex(const Shape& shape, const std::vector<cplx>& values) {
  std::vector<double> s(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    s[2 * i] = values[i].real();
    s[2 * i + 1] = values[i].imag();
  }
  return from_storage(shape, Dtype::complex, std::move(s));
}

Tensor Tensor::scalar(double value) { return real({}, {value}); }

Tensor Tensor::parameter(const Shape& shape, std::vector<double> values) {
  Tensor t = real(shape, std::move(values));
  t.node_->requires_grad = true;
  return t;
}

Tensor Tensor::eye(std::size_t n, Dtype dtype) {
  Tensor t = zeros({n, n}, dtype);
  const std::size_t w = dtype == Dtype::complex ? 2 : 1;
  for (std::size_t i = 0; i < n; ++i) t.node_->value[(i * n + i) * w] = 1.0;
  return t;
}

const detail::Node& Tensor::checked() const {
  if (!node_) throw UsageError("use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(s));
  }
  return s[axis];
}

Dtype Tensor::dtype() const { return checked().dtype; }

std::span<const double> Tensor::storage() const { return checked().value; }

double Tensor::item() const {
  const auto& n = checked();
  if (n.dtype != Dtype::real || n.value.size() != 1) {
    throw UsageError("item() needs a real single-element tensor, got " + shape_str(n.shape));
  }
  return n.value[0];
}

double Tensor::at(std::size_t i) const { return checked().value.at(i); }

cplx Tensor::cat(std::size_t i) const {
  const auto& n = checked();
  if (n.dtype != Dtype::complex) return {n.value.at(i), 0.0};
  return {n.value.at(2 * i), n.value.at(2 * i + 1)};
}

std::vector<double> Tensor::to_vector() const { return checked().value; }

std::vector<cplx> Tensor::to_complex_vector() const {
  std::vector<cplx> out(numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = cat(i);
  return out;
}

bool Tensor::requires_grad() const { return checked().requires_grad; }

bool Tensor::is_leaf() const { return checked().is_leaf(); }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!checked().is_leaf()) throw UsageError("requires_grad can only be toggled on leaves");
  node_->requires_grad = on;
  return *this;
}

std::vector<double> Tensor::grad() const {
  const auto& n = checked();
  if (n.grad.empty()) return std::vector<double>(n.value.size(), 0.0);
  return n.grad;
}

void Tensor::zero_grad() {
  checked();
  node_->grad.clear();
}

void Tensor::assign(std::span<const double> s) {
  const auto& n = checked();
  if (!n.is_leaf()) throw UsageError("assign() on a non-leaf tensor");
  if (s.size() != n.value.size()) {
    throw DimensionError("assign() got " + std::to_string(s.size()) + " slots for shape " +
                         shape_str(n.shape));
  }
  std::copy(s.begin(), s.end(), node_->value.begin());
}

Tensor Tensor::detach() const {
  const auto& n = checked();
  return from_storage(n.shape, n.dtype, n.value);
}

Tensor Tensor::clone() const {
  Tensor t = detach();
  t.node_->requires_grad = checked().requires_grad && checked().is_leaf();
  return t;
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw UsageError("backward() on an undefined tensor");
  if (loss.is_complex() || loss.numel() != 1) {
    throw UsageError("backward() needs a real scalar loss, got " +
                     std::string(loss.is_complex() ? "complex " : "real ") + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  // Shared ownership keeps every record alive while inputs are released below.
  std::vector<std::shared_ptr<detail::Node>> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::shared_ptr<detail::Node>> stack{loss.node()};
  seen.insert(stack.back().get());
  while (!stack.empty()) {
    auto n = std::move(stack.back());
    stack.pop_back();
    for (auto& in : n->inputs) {
      if (in && in->requires_grad && seen.insert(in.get()).second) stack.push_back(in);
    }
    order.push_back(std::move(n));
  }
  // Creation order is a topological order of the tape.
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a->seq > b->seq; });

  loss.node()->grad_buffer()[0] += 1.0;
  for (auto& n : order) {
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  for (auto& n : order) {
    if (!n->is_leaf()) {
      n->grad.clear();
      n->grad.shrink_to_fit();
      n->inputs.clear();
      n->backward = nullptr;
    }
  }
}

}  // namespace semlink::num
