#pragma once

// Hand-built models with known behaviour.

#include "cyclevib/data/levelset.hpp"
#include "cyclevib/model/model.hpp"

namespace mocks {

using cyclevib::nd::DenseLayer;
using cyclevib::nd::Parameter;
using cyclevib::nd::Tensor;

inline DenseLayer linear(const std::string& name, std::size_t out, std::size_t in,
                         const std::vector<std::pair<std::size_t, std::size_t>>& ones) {
  Tensor w({out, in});
  for (auto [o, i] : ones) w(o, i) = 1.0;
  return DenseLayer{Parameter{name + ".weight", w}, Parameter{name + ".bias", Tensor({out})},
                    cyclevib::nd::Activation::kIdentity};
}

inline cyclevib::model::ModelConfig linear_config() {
  cyclevib::model::ModelConfig c;
  c.encoder_widths = {};
  c.decx_widths = {};
  c.decy_widths = {};
  c.lambda = 1.0;
  c.beta = 1.0;
  return c;
}

// Encoder mu = [x0, x1, x2, x0..x4]; dec_y is the identity on Z0; dec_x
// returns [y_hat, z1_3, z1_4]. On data with Y = X[:, :3] it reconstructs
// both exactly, and every decoded input re-encodes to its own y_hat, so
// the model is invariant by construction. Z1 dims 0-2 are dead.
inline cyclevib::model::CycleVibModel invariant_model() {
  auto enc = linear("encoder.0", 8, 5, {{0, 0}, {1, 1}, {2, 2}, {3, 0}, {4, 1}, {5, 2}, {6, 3}, {7, 4}});
  auto dec_y = linear("dec_y.0", 3, 3, {{0, 0}, {1, 1}, {2, 2}});
  // dec_x input is (z1_0..z1_4, y0, y1, y2)
  auto dec_x = linear("dec_x.0", 5, 8, {{0, 5}, {1, 6}, {2, 7}, {3, 3}, {4, 4}});
  return cyclevib::model::CycleVibModel(linear_config(), {enc}, {dec_y}, {dec_x}, std::nullopt);
}

// Encoder whose means are the constant bias vector, whatever the input.
inline cyclevib::model::CycleVibModel constant_encoder_model() {
  auto enc = linear("encoder.0", 8, 5, {});
  enc.bias.value = Tensor::vector({0.3, -0.2, 0.1, 0.5, 0.0, -0.4, 0.2, 0.7});
  auto dec_y = linear("dec_y.0", 3, 3, {{0, 0}, {1, 1}, {2, 2}});
  auto dec_x = linear("dec_x.0", 5, 8, {{0, 5}, {1, 6}, {2, 7}, {3, 3}, {4, 4}});
  return cyclevib::model::CycleVibModel(linear_config(), {enc}, {dec_y}, {dec_x}, std::nullopt);
}

// A generated ellipse dataset with Y replaced by X[:, :3] so the invariant
// mock is also a perfect reconstructor.
inline cyclevib::data::Dataset copy_property_dataset(std::size_t n = 200, std::uint64_t seed = 3) {
  cyclevib::data::LevelSetSpec spec;
  spec.n_points = n;
  spec.seed = seed;
  auto ds = cyclevib::data::generate(spec);
  ds.Y = ds.X.cols_slice(0, 3);
  return ds;
}

}  // namespace mocks

namespace mocks {

// Like invariant_model but dec_x ignores Z1 entirely: X_hat = [y_hat, 0, 0].
inline cyclevib::model::CycleVibModel z1_blind_model() {
  auto enc = linear("encoder.0", 8, 5, {{0, 0}, {1, 1}, {2, 2}, {3, 0}, {4, 1}, {5, 2}, {6, 3}, {7, 4}});
  auto dec_y = linear("dec_y.0", 3, 3, {{0, 0}, {1, 1}, {2, 2}});
  auto dec_x = linear("dec_x.0", 5, 8, {{0, 5}, {1, 6}, {2, 7}});
  return cyclevib::model::CycleVibModel(linear_config(), {enc}, {dec_y}, {dec_x}, std::nullopt);
}

}  // namespace mocks
