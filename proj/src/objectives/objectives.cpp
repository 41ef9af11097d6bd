#include "cyclevib/objectives/objectives.hpp"

#include <cmath>
#include <cstdio>

#include "cyclevib/data/levelset.hpp"

namespace cyclevib::objectives {

using nd::Var;

void LossWeights::validate() const {
  if (!(lambda > 0.0)) throw data::ConfigError("lambda must be > 0");
  if (!(beta >= 0.0)) throw data::ConfigError("beta must be >= 0");
}

const std::vector<std::string>& loss_csv_header() {
  static const std::vector<std::string> header{"step",         "compression",  "nll_x",       "nll_y",
                                               "cycle_recon",  "cycle_sample", "cycle_fixed", "total"};
  return header;
}

std::string loss_csv_row(long step, const LossReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%ld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g", step, r.compression, r.nll_x,
                r.nll_y, r.cycle_recon, r.cycle_sample, r.cycle_fixed, r.total);
  return buf;
}

Var sparse_compression(const Var& mu) {
  if (mu.value().rank() != 2 || mu.rows() == 0) {
    throw nd::ContractError("sparse_compression needs a non-empty (n x d) batch of means");
  }
  Var second_moment = nd::mean(nd::square(mu), nd::Axis::kRows);
  return nd::scale(nd::sum(nd::log(nd::add_scalar(second_moment, 1.0))), 0.5);
}

Var standard_kl(const Var& mu, const Var& log_noise) {
  if (mu.value().rank() != 2 || mu.rows() == 0) throw nd::ContractError("standard_kl needs a non-empty batch");
  if (log_noise.value().size() != mu.cols()) {
    throw nd::DimensionError("standard_kl: log_noise has " + std::to_string(log_noise.value().size()) +
                             " entries for " + std::to_string(mu.cols()) + " latent dims");
  }
  // 1/2 (mu^2 + sigma^2 - 1 - 2 log sigma), summed over dims, averaged over rows
  Var mean_sq = nd::mean(nd::square(mu), nd::Axis::kRows);
  Var variance_part = nd::sub(nd::exp(nd::scale(log_noise, 2.0)), nd::add_scalar(nd::scale(log_noise, 2.0), 1.0));
  return nd::scale(nd::sum(nd::add(mean_sq, variance_part)), 0.5);
}

Var gaussian_nll(const Var& target, const Var& prediction) {
  if (target.shape() != prediction.shape()) {
    throw nd::DimensionError("gaussian_nll: target " + nd::shape_string(target.shape()) + " vs prediction " +
                             nd::shape_string(prediction.shape()));
  }
  Var per_row = nd::sum(nd::square(nd::sub(target, prediction)), nd::Axis::kCols);
  return nd::scale(nd::mean(per_row), 0.5);
}

Var mean_row_distance(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) {
    throw nd::DimensionError("cycle term: " + nd::shape_string(a.shape()) + " vs " + nd::shape_string(b.shape()));
  }
  return nd::mean(nd::row_norm(nd::sub(a, b)));
}

CycleTerms cycle_loss(const Var& y_hat, const Var& y_hat_prime, const Var& y_tilde, const Var& y_tilde_prime,
                      const Var& y_tilde_star_target, const Var& y_tilde_star) {
  return CycleTerms{mean_row_distance(y_hat, y_hat_prime), mean_row_distance(y_tilde, y_tilde_prime),
                    mean_row_distance(y_tilde_star_target, y_tilde_star)};
}

namespace {

void require_finite(const Var& v, const char* name) {
  if (!std::isfinite(v.value().item())) throw nd::NumericError(std::string("loss term '") + name + "' is not finite");
}

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) throw nd::NumericError(std::string("loss term '") + name + "' is not finite");
}

}  // namespace

Var total_loss(const LossComponents& parts, const LossWeights& weights) {
  require_finite(parts.compression, "compression");
  require_finite(parts.nll_x, "nll_x");
  require_finite(parts.nll_y, "nll_y");
  Var likelihood = nd::scale(nd::add(parts.nll_x, parts.nll_y), -1.0);
  if (parts.cycle && weights.beta > 0.0) {
    require_finite(parts.cycle->recon, "cycle_recon");
    require_finite(parts.cycle->sample, "cycle_sample");
    require_finite(parts.cycle->fixed, "cycle_fixed");
    Var cycle = nd::add(nd::add(parts.cycle->recon, parts.cycle->sample), parts.cycle->fixed);
    likelihood = nd::sub(likelihood, nd::scale(cycle, weights.beta));
  }
  return nd::sub(parts.compression, nd::scale(likelihood, weights.lambda));
}

double total_loss(const LossReport& p, const LossWeights& w) {
  require_finite(p.compression, "compression");
  require_finite(p.nll_x, "nll_x");
  require_finite(p.nll_y, "nll_y");
  require_finite(p.cycle_recon, "cycle_recon");
  require_finite(p.cycle_sample, "cycle_sample");
  require_finite(p.cycle_fixed, "cycle_fixed");
  const double cycle = p.cycle_recon + p.cycle_sample + p.cycle_fixed;
  return p.compression - w.lambda * (-p.nll_x - p.nll_y - w.beta * cycle);
}

LossReport make_report(const LossComponents& parts, const Var& total) {
  LossReport r;
  r.compression = parts.compression.value().item();
  r.nll_x = parts.nll_x.value().item();
  r.nll_y = parts.nll_y.value().item();
  if (parts.cycle) {
    r.cycle_recon = parts.cycle->recon.value().item();
    r.cycle_sample = parts.cycle->sample.value().item();
    r.cycle_fixed = parts.cycle->fixed.value().item();
  }
  r.total = total.value().item();
  return r;
}

}  // namespace cyclevib::objectives
