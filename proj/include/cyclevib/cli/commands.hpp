#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cyclevib/cli/run_config.hpp"
#include "cyclevib/eval/evalsuite.hpp"

namespace cyclevib::cli {

enum ExitCode : int { kOk = 0, kAssertionFailed = 1, kConfigError = 2, kRuntimeError = 3 };

/// A threshold check on one EvalReport metric, e.g. `invariance<=0.02`.
struct Assertion {
  std::string metric;
  std::string op;
  double threshold = 0.0;
  std::string text;
};

/// Metrics: mae_x, mae_y, invariance (or invariance_mae), selected_z0, selected_z1.
Assertion parse_assertion(const std::string& text);
double metric_value(const eval::EvalReport& report, const std::string& metric);
bool holds(const Assertion& a, const eval::EvalReport& report);

/// Switches to the beta = 0, standard KL, learned per-dimension noise baseline.
void apply_beta_vae_baseline(RunConfig& config);

/// Loads the configured dataset, or generates it from the spec if the files are absent.
data::Dataset obtain_dataset(const RunConfig& config);

void cmd_gen_data(const RunConfig& config);
void cmd_train(const RunConfig& config);
/// Returns the report and writes it; `failed` receives the assertions that do not hold.
eval::EvalReport cmd_eval(const RunConfig& config, const std::vector<Assertion>& assertions,
                          std::vector<Assertion>* failed = nullptr);
eval::TraversalTable cmd_traverse(const RunConfig& config);

struct SweepPoint {
  double lambda = 0.0;
  double beta = 0.0;
  eval::EvalReport report;
};

/// Picks the most strongly regularized grid point whose reconstruction and
/// prediction MAEs are within (1 + tolerance) of the best in the grid:
/// largest beta first, then smallest lambda. Empty input gives nullopt.
std::optional<std::size_t> select_sweep_point(const std::vector<SweepPoint>& points, double tolerance);

std::vector<SweepPoint> cmd_sweep(const RunConfig& config, const std::vector<double>& lambdas,
                                  const std::vector<double>& betas, std::size_t jobs, double tolerance);

/// Full command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace cyclevib::cli
