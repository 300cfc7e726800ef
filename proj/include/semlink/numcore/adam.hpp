// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "semlink/numcore/tensor.hpp"

namespace semlink::num {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment buffers for one parameter array.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamHyper& hyper);

/// Adam over a fixed list of parameter leaves.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamHyper hyper);

  /// Applies one update from the leaves' accumulated gradients, scaled by
  /// `grad_scale` (for averaging over a batch / clipping).
  void step(double grad_scale = 1.0);
  void zero_grad();
  /// Global L2 norm of the accumulated gradients.
  double grad_norm() const;

  AdamHyper& hyper() { return hyper_; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> states_;
  AdamHyper hyper_;
};

}  // namespace semlink::num
