#include "specembed/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "specembed/errors.hpp"

namespace specembed {

double grad_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                  const Tensor& analytic, double epsilon,
                  const std::vector<bool>* include) {
  if (!x.same_dims(analytic)) {
    throw ShapeError("grad_check: analytic gradient dims do not match input dims");
  }
  if (include && include->size() != x.size()) {
    throw ShapeError("grad_check: include mask size does not match input");
  }
  Tensor probe = x;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (include && !(*include)[i]) continue;
    const double orig = probe[i];
    probe[i] = orig + epsilon;
    const double f_plus = f(probe);
    probe[i] = orig - epsilon;
    const double f_minus = f(probe);
    probe[i] = orig;
    const double numeric = (f_plus - f_minus) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace specembed
