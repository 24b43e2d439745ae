#include "qmixdsa/ndmath/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace qmixdsa::ndmath {

double grad_check(const std::function<double()>& fn,
                  std::span<ParamTensor* const> params, double perturbation,
                  int max_per_tensor) {
  for (ParamTensor* p : params) p->zero_grad();
  (void)fn();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (ParamTensor* p : params) analytic.push_back(p->grad);

  double max_rel = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    ParamTensor& p = *params[k];
    const std::size_t n = p.size();
    if (n == 0) continue;
    std::size_t stride = 1;
    if (max_per_tensor > 0 && n > static_cast<std::size_t>(max_per_tensor)) {
      stride = (n + static_cast<std::size_t>(max_per_tensor) - 1) /
               static_cast<std::size_t>(max_per_tensor);
    }
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = p.values[i];
      p.values[i] = saved + perturbation;
      const double up = fn();
      p.values[i] = saved - perturbation;
      const double down = fn();
      p.values[i] = saved;
      const double numeric = (up - down) / (2.0 * perturbation);
      const double a = analytic[k][i];
      const double denom =
          std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      max_rel = std::max(max_rel, std::fabs(a - numeric) / denom);
    }
  }
  for (ParamTensor* p : params) p->zero_grad();
  return max_rel;
}

}  // namespace qmixdsa::ndmath
