#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cyclevib/ndmath/layers.hpp"

namespace cyclevib::model {

enum class NoiseMode {
  kFixedUnit,     // sigma = 1 in every latent dimension, no parameters
  kLearnedPerDim  // sigma_d = exp(log_noise_d), trained
};

std::string to_string(NoiseMode mode);
NoiseMode noise_mode_from_string(const std::string& name);

struct ModelConfig {
  std::size_t d_in = 5;
  std::size_t d_y = 3;
  std::size_t d_z0 = 3;
  std::size_t d_z1 = 5;
  std::vector<std::size_t> encoder_widths = {64, 64};
  std::vector<std::size_t> decx_widths = {64, 64};
  std::vector<std::size_t> decy_widths = {64, 64};
  NoiseMode noise_mode = NoiseMode::kFixedUnit;
  nd::Activation hidden_activation = nd::Activation::kTanh;
  double lambda = 1.0;
  double beta = 1.0;
  std::uint64_t seed = 1;

  std::size_t d_z() const { return d_z0 + d_z1; }
  /// Throws ConfigError (from cyclevib::data) on invalid dimensions or weights.
  void validate() const;
};

/// Encoder means, sampled codes, and the (Z0, Z1) partition of the codes.
struct LatentBatch {
  nd::Var mu;
  nd::Var z;
  nd::Var z0;
  nd::Var z1;
};

struct CycleOutputs {
  nd::Var x_hat;
  nd::Var y_hat;
  LatentBatch latent;
};

/// Partitioned-latent encoder/decoder. Y is decoded from Z0 only, X from
/// the concatenation (Z1, Y_hat) so property information is routed through Z0.
class CycleVibModel {
 public:
  explicit CycleVibModel(ModelConfig config);
  /// Assembles a model from explicit layers (checkpoint loading, hand-built mocks).
  CycleVibModel(ModelConfig config, std::vector<nd::DenseLayer> encoder, std::vector<nd::DenseLayer> dec_y,
                std::vector<nd::DenseLayer> dec_x, std::optional<nd::Parameter> log_noise);

  const ModelConfig& config() const { return config_; }
  std::span<const nd::DenseLayer> encoder() const { return encoder_; }
  std::span<const nd::DenseLayer> dec_y() const { return dec_y_; }
  std::span<const nd::DenseLayer> dec_x() const { return dec_x_; }
  const std::optional<nd::Parameter>& log_noise() const { return log_noise_; }

  /// All trainable parameters in declaration order (encoder, dec_y, dec_x, log_noise).
  std::vector<nd::Parameter*> parameters();
  std::vector<const nd::Parameter*> parameters() const;
  /// Encoder parameters only.
  std::vector<const nd::Parameter*> encoder_parameters() const;
  std::size_t parameter_count() const;

  /// Sampling std per latent dimension.
  std::vector<double> noise_std() const;

 private:
  void check_structure() const;

  ModelConfig config_;
  std::vector<nd::DenseLayer> encoder_;
  std::vector<nd::DenseLayer> dec_y_;
  std::vector<nd::DenseLayer> dec_x_;
  std::optional<nd::Parameter> log_noise_;
};

/// z = mu + sigma * eps. With `noise == nullptr` eps is zero and z equals mu.
LatentBatch encode(const CycleVibModel& model, const nd::Var& x, nd::Rng* noise);
/// Same with an explicit eps tensor of shape (n x d_z).
LatentBatch encode_with_eps(const CycleVibModel& model, const nd::Var& x, const nd::Tensor& eps);
/// Splits codes into the (Z0, Z1) views.
LatentBatch partition(const CycleVibModel& model, const nd::Var& mu, const nd::Var& z);

nd::Var decode_y(const CycleVibModel& model, const nd::Var& z0);
nd::Var decode_x(const CycleVibModel& model, const nd::Var& z1, const nd::Var& y_hat);

/// encode -> decode_y(z0) -> decode_x(z1, y_hat).
CycleOutputs full_cycle(const CycleVibModel& model, const nd::Var& x, nd::Rng* noise);

// Tape-free inference helpers, means only.
nd::Tensor encode_means(const CycleVibModel& model, const nd::Tensor& x);
nd::Tensor predict_y(const CycleVibModel& model, const nd::Tensor& z0);
nd::Tensor reconstruct_x(const CycleVibModel& model, const nd::Tensor& z1, const nd::Tensor& y_hat);

}  // namespace cyclevib::model
