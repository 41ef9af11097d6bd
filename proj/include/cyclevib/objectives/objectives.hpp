#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cyclevib/ndmath/ops.hpp"

namespace cyclevib::objectives {

struct LossWeights {
  double lambda = 1.0;  // likelihood weight against compression
  double beta = 1.0;    // cycle weight inside the likelihood bracket

  void validate() const;
};

/// Per-term values of one batch pass.
struct LossReport {
  double compression = 0.0;
  double nll_x = 0.0;
  double nll_y = 0.0;
  double cycle_recon = 0.0;   // |Y_hat - Y_hat'|
  double cycle_sample = 0.0;  // |Y_tilde - Y_tilde'|
  double cycle_fixed = 0.0;   // |Y_hat - Y_tilde*|
  double total = 0.0;
};

/// Column names of the training-curve CSV, in order.
const std::vector<std::string>& loss_csv_header();
std::string loss_csv_row(long step, const LossReport& r);

/// 1/2 sum_j log(1 + m_j), m_j the per-dimension mean of mu^2 over the batch:
/// the Gaussian information term with a diagonal projection.
nd::Var sparse_compression(const nd::Var& mu);

/// Batch mean of KL(N(mu, diag(sigma^2)) || N(0, I)) with sigma = exp(log_noise).
nd::Var standard_kl(const nd::Var& mu, const nd::Var& log_noise);

/// Unit-variance Gaussian negative log-likelihood without constants:
/// batch mean of 1/2 |target - prediction|^2.
nd::Var gaussian_nll(const nd::Var& target, const nd::Var& prediction);

/// Batch mean of row-wise Euclidean distances.
nd::Var mean_row_distance(const nd::Var& a, const nd::Var& b);

struct CycleTerms {
  nd::Var recon;
  nd::Var sample;
  nd::Var fixed;
};

/// The three property-consistency terms. `y_tilde_star_target` holds the
/// anchor prediction Y_hat repeated once per fixed-Z0 sample.
CycleTerms cycle_loss(const nd::Var& y_hat, const nd::Var& y_hat_prime, const nd::Var& y_tilde,
                      const nd::Var& y_tilde_prime, const nd::Var& y_tilde_star_target, const nd::Var& y_tilde_star);

struct LossComponents {
  nd::Var compression;
  nd::Var nll_x;
  nd::Var nll_y;
  std::optional<CycleTerms> cycle;  // absent when the cycle is disabled
};

/// compression - lambda * (-nll_x - nll_y - beta * (recon + sample + fixed)).
/// Throws NumericError naming the first non-finite term.
nd::Var total_loss(const LossComponents& parts, const LossWeights& weights);
/// Same assembly on plain numbers.
double total_loss(const LossReport& parts, const LossWeights& weights);

/// Reads the scalar values of `parts` and the assembled total into a report.
LossReport make_report(const LossComponents& parts, const nd::Var& total);

}  // namespace cyclevib::objectives
