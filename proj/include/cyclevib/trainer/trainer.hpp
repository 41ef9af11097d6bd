#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "cyclevib/data/levelset.hpp"
#include "cyclevib/model/model.hpp"
#include "cyclevib/ndmath/adam.hpp"
#include "cyclevib/objectives/objectives.hpp"

namespace cyclevib::trainer {

enum class Compression {
  kSparse,     // diagonal Gaussian information term on the encoder means
  kStandardKl  // KL to N(0, I), the beta-VAE baseline
};

std::string to_string(Compression c);
Compression compression_from_string(const std::string& name);

struct TrainConfig {
  std::size_t epochs = 2000;
  std::size_t batch_size = 256;
  double lr = 1e-3;
  /// Learning rate at the last epoch as a fraction of `lr` (cosine decay); 1 keeps it constant.
  double lr_final_fraction = 1.0;
  /// 0 means "same as batch_size".
  std::size_t n_uniform_samples = 0;
  std::size_t n_fixed_z0_samples = 0;
  /// Epochs trained with the cycle weight at zero, then epochs over which it ramps linearly to beta.
  std::size_t cycle_start_epoch = 0;
  std::size_t cycle_ramp_epochs = 0;
  Compression compression = Compression::kSparse;
  std::size_t log_every = 10;        // steps
  std::size_t checkpoint_every = 0;  // epochs, 0 disables
  std::uint64_t seed = 1;

  std::size_t uniform_count() const { return n_uniform_samples ? n_uniform_samples : batch_size; }
  std::size_t fixed_count() const { return n_fixed_z0_samples ? n_fixed_z0_samples : batch_size; }
  void validate() const;
};

/// Per-dimension mean and sample standard deviation of a batch of codes.
struct LatentStats {
  std::vector<double> mean;
  std::vector<double> std;
};

LatentStats latent_stats(const nd::Tensor& codes);

/// Codes with dimension d drawn from U[mean_d - std_d, mean_d + std_d].
/// All-zero spread falls back to +-1 with a warning.
nd::Tensor sample_uniform_latent(const LatentStats& stats, std::size_t count, nd::Rng& rng);

/// `count` codes sharing the anchor's Z0 block bit-exactly, Z1 sampled as above
/// using the Z1 part of `stats` (the full d_z0 + d_z1 statistics).
nd::Tensor sample_fixed_z0(std::span<const double> z0_anchor, const LatentStats& stats, std::size_t count,
                           nd::Rng& rng);

struct LoggedReport {
  std::int64_t step = 0;
  objectives::LossReport report;
};

struct TrainState {
  model::CycleVibModel model;
  nd::OptimizerState optimizer;
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  std::vector<LoggedReport> history;
};

TrainState make_train_state(const model::ModelConfig& model_config, const TrainConfig& train_config);

/// Random streams consumed by one step.
struct StepRngs {
  nd::Rng noise;
  nd::Rng latent;
};

/// The recorded graph of one training step, before backward.
struct StepGraph {
  objectives::LossComponents parts;
  nd::Var total;
  nd::Var x_hat;
  nd::Var y_hat;
  std::size_t cycle_batch_rows = 0;  // rows of the concatenated second-pass batch, 0 without cycle
};

/// Records phases (a) encode/decode, (b) uniform and fixed-Z0 latent sampling,
/// (c) second pass over the concatenated generated batch, and assembles the loss.
/// The cycle phases are skipped when `weights.beta == 0`.
StepGraph build_step(nd::Tape& tape, const model::CycleVibModel& model, const nd::Tensor& x_batch,
                     const nd::Tensor& y_batch, const objectives::LossWeights& weights, const TrainConfig& config,
                     StepRngs& rngs);

/// One joint optimizer step. Atomic: on any error the parameters are untouched.
objectives::LossReport train_step(TrainState& state, const nd::Tensor& x_batch, const nd::Tensor& y_batch,
                                  const objectives::LossWeights& weights, const TrainConfig& config, StepRngs& rngs);

struct FitOptions {
  std::optional<std::filesystem::path> checkpoint_stem;
  std::optional<std::filesystem::path> resume_from;
  /// Called after each epoch with the state.
  std::function<void(const TrainState&)> on_epoch;
};

/// Cycle weight in effect during `epoch`.
double cycle_weight(const TrainConfig& config, double beta, std::size_t epoch);
double learning_rate(const TrainConfig& config, std::size_t epoch);

TrainState fit(const data::Dataset& dataset, const model::ModelConfig& model_config, const TrainConfig& config,
               const objectives::LossWeights& weights, const FitOptions& options = {});

}  // namespace cyclevib::trainer
