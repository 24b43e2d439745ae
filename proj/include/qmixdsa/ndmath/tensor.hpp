#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qmixdsa/rng.hpp"

namespace qmixdsa::ndmath {

// Dense parameter block plus an accumulated-gradient buffer of the same shape.
// Gradients accumulate across backward passes until the optimizer consumes
// and clears them.
struct ParamTensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;

  static ParamTensor zeros(std::vector<std::size_t> shape);

  // Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
  static ParamTensor uniform(std::vector<std::size_t> shape, std::size_t fan_in,
                             Rng& rng);

  std::size_t size() const { return values.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  void zero_grad();

  // Throws NumericError if any value is NaN or infinite.
  void require_finite(const char* context) const;
};

double global_grad_norm(std::span<ParamTensor* const> params);

// Scales all gradients by max_norm/norm when the global norm exceeds max_norm.
void clip_global_grad_norm(std::span<ParamTensor* const> params,
                           double max_norm);

}  // namespace qmixdsa::ndmath
