#include "pmnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "pmnet/error.hpp"

namespace pmnet {

namespace {

double evaluate(const std::function<double()>& f) {
  const double v = f();
  if (!std::isfinite(v)) throw NumericError("grad_check: objective returned a non-finite value");
  return v;
}

}  // namespace

GradCheckResult grad_check(const std::function<double()>& f, std::span<Tensor* const> params, double eps) {
  if (!(eps > 0)) throw ParameterError("grad_check: eps must be positive");
  GradCheckResult result;
  evaluate(f);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p];
    if (!t.grad || t.grad->size() != t.values.size()) {
      throw ContractError("grad_check: parameter " + std::to_string(p) + " has no analytic gradient");
    }
    for (Index i = 0; i < t.values.size(); ++i) {
      const double saved = t.values[i];
      t.values[i] = saved + eps;
      const double up = evaluate(f);
      t.values[i] = saved - eps;
      const double down = evaluate(f);
      t.values[i] = saved;

      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = (*t.grad)[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double err = std::abs(analytic - numeric) / denom;
      ++result.coordinates;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_param = p;
        result.worst_index = i;
        result.analytic = analytic;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace pmnet
