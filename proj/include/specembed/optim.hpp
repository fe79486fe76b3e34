#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "specembed/tensor.hpp"

namespace specembed {

// Name -> parameter tensor bindings, ordered by name for deterministic
// update order.
using ParamRefs = std::vector<std::pair<std::string, Tensor*>>;

// Heavy-ball SGD: v <- mu*v - lr*g; theta <- theta + v.
class SgdMomentum {
 public:
  SgdMomentum(double learning_rate, double momentum);

  void step(const ParamRefs& params, const std::map<std::string, Tensor>& grads);

  double learning_rate() const { return learning_rate_; }
  void set_learning_rate(double lr);
  double momentum() const { return momentum_; }
  const std::map<std::string, Tensor>& velocity() const { return velocity_; }

 private:
  double learning_rate_;
  double momentum_;
  std::map<std::string, Tensor> velocity_;
};

}  // namespace specembed
