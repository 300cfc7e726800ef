// SPDX-License-Identifier: Apache-2.0
#include "semlink/numcore/adam.hpp"

#include <cmath>

namespace semlink::num {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamHyper& hyper) {
  if (grads.size() != params.size()) throw DimensionError("adam_step: gradient size differs from parameters");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw DimensionError("adam_step: state size differs from parameters");
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= hyper.lr * mhat / (std::sqrt(vhat) + hyper.eps);
  }
}

Adam::Adam(std::vector<Tensor> params, AdamHyper hyper)
    : params_(std::move(params)), states_(params_.size()), hyper_(hyper) {
  for (const auto& p : params_) {
    if (!p.is_leaf() || !p.requires_grad()) throw UsageError("Adam needs trainable leaf tensors");
  }
}

void Adam::step(double grad_scale) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    std::vector<double> g = params_[i].grad();
    for (auto& x : g) x *= grad_scale;
    std::vector<double> w = params_[i].to_vector();
    adam_step(w, g, states_[i], hyper_);
    params_[i].assign(w);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double Adam::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_) {
    const auto& g = p.node()->grad;
    for (double x : g) s += x * x;
  }
  return std::sqrt(s);
}

}  // namespace semlink::num
