#ifndef PMNET_GRADCHECK_HPP_
#define PMNET_GRADCHECK_HPP_

#include <functional>
#include <span>

#include "pmnet/tensor.hpp"

namespace pmnet {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  Index worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  Index coordinates = 0;
};

// Compares each parameter's `grad` (the analytic gradient, filled beforehand)
// with central differences of `f` taken by perturbing the values in place.
// Relative error uses the denominator max(|analytic|, |numeric|, 1e-8).
// Throws NumericError when f returns a non-finite value.
GradCheckResult grad_check(const std::function<double()>& f, std::span<Tensor* const> params, double eps = 1e-5);

}  // namespace pmnet

#endif  // PMNET_GRADCHECK_HPP_
