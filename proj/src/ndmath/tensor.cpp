#include "qmixdsa/ndmath/tensor.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "qmixdsa/error.hpp"

namespace qmixdsa::ndmath {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

ParamTensor ParamTensor::zeros(std::vector<std::size_t> shape) {
  ParamTensor t;
  const std::size_t n = shape_product(shape);
  t.shape = std::move(shape);
  t.values.assign(n, 0.0);
  t.grad.assign(n, 0.0);
  return t;
}

ParamTensor ParamTensor::uniform(std::vector<std::size_t> shape,
                                 std::size_t fan_in, Rng& rng) {
  ParamTensor t = zeros(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.values) v = rng.uniform(-bound, bound);
  return t;
}

void ParamTensor::zero_grad() {
  std::fill(grad.begin(), grad.end(), 0.0);
}

void ParamTensor::require_finite(const char* context) const {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite parameter value in ") +
                         context);
    }
  }
}

double global_grad_norm(std::span<ParamTensor* const> params) {
  double sq = 0.0;
  for (const ParamTensor* p : params) {
    for (double g : p->grad) sq += g * g;
  }
  return std::sqrt(sq);
}

void clip_global_grad_norm(std::span<ParamTensor* const> params,
                           double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm <= max_norm || norm == 0.0) return;
  const double scale = max_norm / norm;
  for (ParamTensor* p : params) {
    for (double& g : p->grad) g *= scale;
  }
}

}  // namespace qmixdsa::ndmath
