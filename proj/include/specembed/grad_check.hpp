#pragma once

#include <functional>
#include <vector>

#include "specembed/tensor.hpp"

namespace specembed {

// Compares an analytic gradient of a scalar function against central finite
// differences, coordinate by coordinate:
//
//   numeric_i = (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps)
//   rel_i     = |analytic_i - numeric_i| / max(|analytic_i|, |numeric_i|, 1e-8)
//
// Returns the max relative error over all checked coordinates. `include`,
// when given, masks out coordinates sitting on nondifferentiable points
// (ReLU kinks, pooling ties); it must match x element for element.
// The function must be deterministic (dropout in eval mode or mask frozen).
double grad_check(const std::function<double(const Tensor&)>& f, const Tensor& x,
                  const Tensor& analytic, double epsilon = 1e-5,
                  const std::vector<bool>* include = nullptr);

}  // namespace specembed
