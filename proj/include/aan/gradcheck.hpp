#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "aan/tensor.hpp"

namespace aan::ndgrad {

// Compare analytic gradients against central differences
// (f(x+eps) - f(x-eps)) / (2 eps), one coordinate at a time. Returns the
// worst relative error with denominator max(|analytic|, |numeric|, 1e-8).
// The function must be deterministic and smooth at the given point.
inline double finite_difference_check(
    const std::function<double(const std::vector<Tensor>&)>& f,
    std::vector<Tensor> params, const std::vector<Tensor>& analytic,
    double eps = 1e-6) {
  check(params.size() == analytic.size(), "finite_difference_check: size mismatch");
  double worst = 0.0;
  for (std::size_t p = 0; p < params.size(); ++p) {
    check(params[p].same_shape(analytic[p]), "finite_difference_check: shape mismatch");
    for (std::size_t i = 0; i < params[p].numel(); ++i) {
      double saved = params[p][i];
      params[p][i] = saved + eps;
      double fp = f(params);
      params[p][i] = saved - eps;
      double fm = f(params);
      params[p][i] = saved;
      double numeric = (fp - fm) / (2.0 * eps);
      double a = analytic[p][i];
      double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      worst = std::max(worst, std::fabs(a - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace aan::ndgrad
