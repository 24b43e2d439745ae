#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qmixdsa/ndmath/tensor.hpp"

namespace qmixdsa::ndmath {

// First/second-moment buffers for one parameter tensor. t counts completed
// update steps; both moments are all-zero at t = 0.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  static AdamState for_tensor(const ParamTensor& p);
};

// Bias-corrected Adam update over a group of tensors. Consumes the grad
// buffers (they are zeroed afterwards) and validates that the result is
// finite.
void adam_step(std::span<ParamTensor* const> params,
               std::span<AdamState> states, double lr, double beta1 = 0.9,
               double beta2 = 0.999, double eps = 1e-8);

}  // namespace qmixdsa::ndmath
