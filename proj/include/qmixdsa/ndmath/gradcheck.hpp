#pragma once

#include <functional>
#include <span>

#include "qmixdsa/ndmath/tensor.hpp"

namespace qmixdsa::ndmath {

// Central-difference check of analytic gradients.
//
// fn must be deterministic; each call runs a forward pass and accumulates
// analytic gradients into the tensors' grad buffers, returning the scalar
// objective. Returns the maximum over checked elements of
//   |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
//
// max_per_tensor < 0 checks every element; otherwise a deterministic strided
// subset of at most that many elements per tensor.
double grad_check(const std::function<double()>& fn,
                  std::span<ParamTensor* const> params,
                  double perturbation = 1e-5, int max_per_tensor = -1);

}  // namespace qmixdsa::ndmath
