#include "cyclevib/ndmath/layers.hpp"

#include <cmath>

namespace cyclevib::nd {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kIdentity: return "identity";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
    case Activation::kSoftplus: return "softplus";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "softplus") return Activation::kSoftplus;
  throw ContractError("unknown activation '" + name + "'");
}

DenseLayer make_dense(const std::string& name, std::size_t in, std::size_t out, Activation activation, Rng& rng) {
  const double w_bound = std::sqrt(6.0 / static_cast<double>(in + out));
  const double b_bound = 1.0 / std::sqrt(static_cast<double>(in));
  DenseLayer layer;
  layer.weights = Parameter{name + ".weight", rng.uniform({out, in}, -w_bound, w_bound)};
  layer.bias = Parameter{name + ".bias", rng.uniform({out}, -b_bound, b_bound)};
  layer.activation = activation;
  return layer;
}

std::vector<DenseLayer> make_mlp(const std::string& name, std::size_t in, const std::vector<std::size_t>& widths,
                                 std::size_t out, Activation hidden, Rng& rng) {
  std::vector<DenseLayer> layers;
  std::size_t prev = in;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    layers.push_back(make_dense(name + "." + std::to_string(i), prev, widths[i], hidden, rng));
    prev = widths[i];
  }
  layers.push_back(make_dense(name + "." + std::to_string(widths.size()), prev, out, Activation::kIdentity, rng));
  return layers;
}

Var apply(const DenseLayer& layer, const Var& input) {
  Tape& tape = input.tape();
  Var pre = add(matmul(input, tape.parameter(layer.weights), /*transpose_b=*/true), tape.parameter(layer.bias));
  switch (layer.activation) {
    case Activation::kIdentity: return pre;
    case Activation::kTanh: return tanh(pre);
    case Activation::kRelu: return relu(pre);
    case Activation::kSoftplus: return softplus(pre);
  }
  return pre;
}

Var forward(std::span<const DenseLayer> layers, const Var& input) {
  Var h = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& layer = layers[i];
    if (layer.bias.value.size() != layer.out_features()) {
      throw DimensionError("layer " + std::to_string(i) + " ('" + layer.weights.name + "'): bias extent " +
                           std::to_string(layer.bias.value.size()) + " != out extent " +
                           std::to_string(layer.out_features()));
    }
    if (h.value().rank() != 2 || h.cols() != layer.in_features()) {
      throw DimensionError("layer " + std::to_string(i) + " ('" + layer.weights.name + "') expects " +
                           std::to_string(layer.in_features()) + " input columns, got " +
                           shape_string(h.shape()));
    }
    h = apply(layer, h);
  }
  return h;
}

}  // namespace cyclevib::nd
