// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "semlink/numcore/ops.hpp"

namespace semlink::num {

inline constexpr std::size_t width(Dtype d) { return d == Dtype::complex ? 2 : 1; }

inline bool wants_grad(const detail::Node& self, std::size_t i) {
  return i < self.inputs.size() && self.inputs[i] && self.inputs[i]->requires_grad;
}

inline std::vector<double>& in_grad(detail::Node& self, std::size_t i) {
  return self.inputs[i]->grad_buffer();
}

inline const std::vector<double>& in_value(const detail::Node& self, std::size_t i) {
  return self.inputs[i]->value;
}

inline void accumulate(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

inline void require_real(const Tensor& a, const char* op) {
  if (a.is_complex()) throw DtypeError(std::string(op) + " needs a real tensor");
}

inline void require_complex(const Tensor& a, const char* op) {
  if (!a.is_complex()) throw DtypeError(std::string(op) + " needs a complex tensor");
}

inline void require_same_dtype(const Tensor& a, const Tensor& b, const char* op) {
  if (a.dtype() != b.dtype()) throw DtypeError(std::string(op) + ": operands differ in dtype");
}

}  // namespace semlink::num
