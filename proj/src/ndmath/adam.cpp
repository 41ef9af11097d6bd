#include "cyclevib/ndmath/adam.hpp"

#include <cmath>

namespace cyclevib::nd {

OptimizerState make_optimizer_state(std::span<Parameter* const> params, AdamOptions options) {
  if (!(options.learning_rate > 0.0)) throw ContractError("learning rate must be positive");
  OptimizerState state;
  state.options = options;
  for (const Parameter* p : params) {
    state.first_moment.emplace_back(p->value.shape());
    state.second_moment.emplace_back(p->value.shape());
  }
  return state;
}

void optimizer_step(std::span<Parameter* const> params, std::span<const Tensor> grads, OptimizerState& state) {
  const AdamOptions& o = state.options;
  if (!(o.learning_rate > 0.0)) throw ContractError("learning rate must be positive");
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw DimensionError("optimizer: " + std::to_string(params.size()) + " params, " +
                         std::to_string(grads.size()) + " grads, " + std::to_string(state.first_moment.size()) +
                         " moment buffers");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].shape() != params[k]->value.shape() || state.first_moment[k].shape() != grads[k].shape()) {
      throw DimensionError("optimizer: shape mismatch for parameter '" + params[k]->name + "'");
    }
    if (!grads[k].all_finite()) throw NumericError("non-finite gradient for parameter '" + params[k]->name + "'");
  }

  const std::int64_t t = state.step_count + 1;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->value.data();
    auto g = grads[k].data();
    auto m = state.first_moment[k].data();
    auto v = state.second_moment[k].data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
  state.step_count = t;
}

}  // namespace cyclevib::nd
