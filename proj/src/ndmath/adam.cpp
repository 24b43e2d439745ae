#include "qmixdsa/ndmath/adam.hpp"

#include <cmath>

#include "qmixdsa/error.hpp"

namespace qmixdsa::ndmath {

AdamState AdamState::for_tensor(const ParamTensor& p) {
  AdamState s;
  s.m.assign(p.size(), 0.0);
  s.v.assign(p.size(), 0.0);
  return s;
}

void adam_step(std::span<ParamTensor* const> params,
               std::span<AdamState> states, double lr, double beta1,
               double beta2, double eps) {
  if (params.empty()) throw UsageError("adam_step: no parameters");
  if (params.size() != states.size()) {
    throw UsageError("adam_step: state/parameter count mismatch");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    ParamTensor& p = *params[k];
    AdamState& s = states[k];
    if (p.grad.size() != p.size() || s.m.size() != p.size()) {
      throw UsageError("adam_step: gradient buffer mismatch");
    }
    s.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      s.m[i] = beta1 * s.m[i] + (1.0 - beta1) * g;
      s.v[i] = beta2 * s.v[i] + (1.0 - beta2) * g * g;
      const double mhat = s.m[i] / bc1;
      const double vhat = s.v[i] / bc2;
      p.values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
      p.grad[i] = 0.0;
    }
    p.require_finite("adam_step");
  }
}

}  // namespace qmixdsa::ndmath
