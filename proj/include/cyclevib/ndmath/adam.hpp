#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cyclevib/ndmath/tape.hpp"

namespace cyclevib::nd {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  std::int64_t step_count = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  AdamOptions options;
};

OptimizerState make_optimizer_state(std::span<Parameter* const> params, AdamOptions options = {});

/// Bias-corrected Adam update. Validates every gradient before touching any
/// parameter, so a NaN leaves params and state unchanged.
void optimizer_step(std::span<Parameter* const> params, std::span<const Tensor> grads, OptimizerState& state);

}  // namespace cyclevib::nd
