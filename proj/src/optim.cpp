#include "specembed/optim.hpp"

#include "specembed/errors.hpp"

namespace specembed {

SgdMomentum::SgdMomentum(double learning_rate, double momentum)
    : learning_rate_(learning_rate), momentum_(momentum) {
  if (learning_rate <= 0.0) throw ParamError("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ParamError("momentum must be in [0, 1)");
}

void SgdMomentum::set_learning_rate(double lr) {
  if (lr <= 0.0) throw ParamError("learning rate must be positive");
  learning_rate_ = lr;
}

void SgdMomentum::step(const ParamRefs& params, const std::map<std::string, Tensor>& grads) {
  for (const auto& [name, param] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) throw ParamError("missing gradient for parameter '" + name + "'");
    const Tensor& g = it->second;
    if (!g.same_dims(*param)) {
      throw ShapeError("gradient dims " + dims_to_string(g.dims()) + " for '" + name +
                       "' do not match parameter dims " + dims_to_string(param->dims()));
    }
    auto [vit, inserted] = velocity_.try_emplace(name, Tensor(param->dims()));
    Tensor& v = vit->second;
    if (!inserted && !v.same_dims(*param)) {
      throw ShapeError("velocity dims do not match parameter '" + name + "'");
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = momentum_ * v[i] - learning_rate_ * g[i];
      (*param)[i] += v[i];
    }
  }
}

}  // namespace specembed
