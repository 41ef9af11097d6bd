#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cyclevib/data/levelset.hpp"
#include "cyclevib/model/model.hpp"

namespace cyclevib::eval {

struct InvarianceOptions {
  std::size_t n_references = 25;
  std::size_t n_samples = 400;
  std::uint64_t seed = 1;
};

struct SparsityReport {
  std::vector<double> sigma_signal;  // sample std of encoder means per latent dim
  std::vector<double> sigma_noise;   // sampling std per latent dim
  std::vector<bool> selected;        // signal > noise
};

struct ReconstructionMaes {
  double mae_x = 0.0;
  double mae_y = 0.0;
};

struct EvalReport {
  double mae_x = 0.0;
  double mae_y = 0.0;
  double invariance_mae = 0.0;
  std::vector<double> sigma_signal;
  std::vector<double> sigma_noise;
  std::vector<bool> selected_dims;
  std::size_t n_references = 0;
  std::size_t n_samples_per_reference = 0;
  std::size_t d_z0 = 0;

  std::size_t selected_in_z0() const;
  std::size_t selected_in_z1() const;
};

nlohmann::json to_json(const EvalReport& r);
/// Checks that `j` has every EvalReport field with the right type and consistent lengths.
bool matches_report_schema(const nlohmann::json& j, std::string* why = nullptr);

/// Mean |Y_hat - Y_tilde| over references, fixed-Z0 samples and property dims.
/// Z1 is drawn from U[mean +- std] of the test-set encoder means.
double invariance_mae(const model::CycleVibModel& model, const nd::Tensor& test_x, const InvarianceOptions& options);

SparsityReport sparsity_report(const model::CycleVibModel& model, const nd::Tensor& test_x);

/// MAE of X_hat vs X and Y_hat vs Y with noise-free encodings.
ReconstructionMaes reconstruction_maes(const model::CycleVibModel& model, const nd::Tensor& test_x,
                                       const nd::Tensor& test_y);

/// All of the above on the dataset's test split.
EvalReport evaluate(const model::CycleVibModel& model, const data::Dataset& dataset,
                    const InvarianceOptions& options = {});

/// Latent dimension with the highest signal-to-noise ratio within [begin, end).
std::size_t best_snr_dim(const SparsityReport& report, std::size_t begin, std::size_t end);

struct TraversalSpec {
  std::optional<std::size_t> z0_dim;  // index into Z0; default: highest SNR in Z0
  std::vector<double> z0_values;      // default: evenly spaced over the observed test range
  std::size_t n_z0_values = 10;
  std::vector<std::size_t> z1_dims;   // indices into Z1; default: highest SNR in Z1
  std::size_t steps = 50;
  double range_std = 1.0;  // sweep mean +- range_std * std
  bool extended = false;   // widen the sweep to +-2 std
};

struct TraversalTable {
  std::size_t z0_dim = 0;
  std::vector<std::size_t> z1_dims;
  std::vector<double> z0_values;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::size_t original_dim = 0;

  void write_csv(const std::filesystem::path& path) const;
  nlohmann::json metadata() const;
};

/// Decodes a grid over the swept Z1 dims for each Z0 value (other dims at
/// their test mean), maps the reconstructions back to the original input space
/// and re-predicts the property. Columns: z0_value, z1_<k>..., x_orig_<i>..., y_pred, y_anchor.
TraversalTable traverse(const model::CycleVibModel& model, const data::Dataset& dataset, const TraversalSpec& spec);

void write_sparsity_csv(const SparsityReport& report, const std::filesystem::path& path);

}  // namespace cyclevib::eval
