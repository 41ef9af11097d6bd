#pragma once

#include <span>
#include <string>
#include <vector>

#include "cyclevib/ndmath/ops.hpp"
#include "cyclevib/ndmath/rng.hpp"

namespace cyclevib::nd {

enum class Activation { kIdentity, kTanh, kRelu, kSoftplus };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// y = act(x W^T + b) with W stored (out x in).
struct DenseLayer {
  Parameter weights;
  Parameter bias;
  Activation activation = Activation::kIdentity;

  std::size_t in_features() const { return weights.value.cols(); }
  std::size_t out_features() const { return weights.value.rows(); }
};

/// Weights ~ U(+-sqrt(6/(in+out))), bias ~ U(+-1/sqrt(in)).
DenseLayer make_dense(const std::string& name, std::size_t in, std::size_t out, Activation activation, Rng& rng);

/// Fully connected stack: hidden layers use `hidden`, the last layer is linear.
std::vector<DenseLayer> make_mlp(const std::string& name, std::size_t in, const std::vector<std::size_t>& widths,
                                 std::size_t out, Activation hidden, Rng& rng);

Var apply(const DenseLayer& layer, const Var& input);

/// Runs the stack on `input`; throws DimensionError naming the first layer whose in-extent mismatches.
Var forward(std::span<const DenseLayer> layers, const Var& input);

}  // namespace cyclevib::nd
