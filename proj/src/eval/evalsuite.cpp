#include "cyclevib/eval/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <span>

#include "cyclevib/ndmath/rng.hpp"
#include "cyclevib/trainer/trainer.hpp"

namespace cyclevib::eval {

using nd::Tensor;

std::size_t EvalReport::selected_in_z0() const {
  return static_cast<std::size_t>(
      std::count(selected_dims.begin(), selected_dims.begin() + static_cast<std::ptrdiff_t>(d_z0), true));
}

std::size_t EvalReport::selected_in_z1() const {
  return static_cast<std::size_t>(
      std::count(selected_dims.begin() + static_cast<std::ptrdiff_t>(d_z0), selected_dims.end(), true));
}

nlohmann::json to_json(const EvalReport& r) {
  return nlohmann::json{{"mae_x", r.mae_x},
                        {"mae_y", r.mae_y},
                        {"invariance_mae", r.invariance_mae},
                        {"sigma_signal", r.sigma_signal},
                        {"sigma_noise", r.sigma_noise},
                        {"selected_dims", r.selected_dims},
                        {"n_references", r.n_references},
                        {"n_samples_per_reference", r.n_samples_per_reference},
                        {"d_z0", r.d_z0},
                        {"selected_in_z0", r.selected_in_z0()},
                        {"selected_in_z1", r.selected_in_z1()}};
}

bool matches_report_schema(const nlohmann::json& j, std::string* why) {
  auto fail = [why](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (!j.is_object()) return fail("report is not an object");
  for (const char* k : {"mae_x", "mae_y", "invariance_mae"}) {
    if (!j.contains(k) || !j[k].is_number()) return fail(std::string(k) + " missing or not a number");
    if (j[k].get<double>() < 0.0) return fail(std::string(k) + " is negative");
  }
  for (const char* k : {"n_references", "n_samples_per_reference", "d_z0", "selected_in_z0", "selected_in_z1"}) {
    if (!j.contains(k) || !j[k].is_number_unsigned()) return fail(std::string(k) + " missing or not a count");
  }
  for (const char* k : {"sigma_signal", "sigma_noise", "selected_dims"}) {
    if (!j.contains(k) || !j[k].is_array()) return fail(std::string(k) + " missing or not an array");
  }
  const auto d = j["sigma_signal"].size();
  if (j["sigma_noise"].size() != d || j["selected_dims"].size() != d) return fail("per-dimension arrays differ in length");
  for (std::size_t i = 0; i < d; ++i) {
    if (!j["sigma_signal"][i].is_number() || !j["sigma_noise"][i].is_number() || !j["selected_dims"][i].is_boolean()) {
      return fail("per-dimension entry " + std::to_string(i) + " has the wrong type");
    }
    const bool sel = j["sigma_signal"][i].get<double>() > j["sigma_noise"][i].get<double>();
    if (sel != j["selected_dims"][i].get<bool>()) return fail("selected_dims inconsistent with sigmas");
  }
  return true;
}

namespace {

void require_rows(const Tensor& x, std::size_t minimum, const char* what) {
  if (x.rank() != 2 || x.rows() < minimum) {
    throw nd::ContractError(std::string(what) + " needs at least " + std::to_string(minimum) + " rows");
  }
}

double mean_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw nd::DimensionError("MAE operands differ in shape");
  if (a.size() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

// Re-encodes generated inputs and predicts their property from the Z0 means.
Tensor repredict(const model::CycleVibModel& model, const Tensor& x) {
  const Tensor mu = model::encode_means(model, x);
  return model::predict_y(model, mu.cols_slice(0, model.config().d_z0));
}

}  // namespace

double invariance_mae(const model::CycleVibModel& model, const Tensor& test_x, const InvarianceOptions& options) {
  require_rows(test_x, 1, "invariance_mae");
  if (options.n_samples == 0) throw nd::ContractError("invariance_mae needs n_samples > 0");
  if (options.n_references == 0) throw nd::ContractError("invariance_mae needs n_references > 0");
  const auto& c = model.config();

  const Tensor mu = model::encode_means(model, test_x);
  const trainer::LatentStats stats = trainer::latent_stats(mu);
  const std::size_t n_refs = std::min(options.n_references, test_x.rows());
  const Tensor ref_mu = mu.rows_slice(0, n_refs);
  const Tensor y_ref = model::predict_y(model, ref_mu.cols_slice(0, c.d_z0));

  nd::Rng rng(options.seed, nd::Stream::kEval);
  const std::size_t total = n_refs * options.n_samples;
  Tensor z1({total, c.d_z1});
  Tensor y_anchor({total, c.d_y});
  for (std::size_t r = 0; r < n_refs; ++r) {
    const std::vector<double> anchor = ref_mu.row(r);
    const Tensor codes =
        trainer::sample_fixed_z0(std::span(anchor).first(c.d_z0), stats, options.n_samples, rng);
    for (std::size_t s = 0; s < options.n_samples; ++s) {
      const std::size_t row = r * options.n_samples + s;
      for (std::size_t j = 0; j < c.d_z1; ++j) z1(row, j) = codes(s, c.d_z0 + j);
      for (std::size_t j = 0; j < c.d_y; ++j) y_anchor(row, j) = y_ref(r, j);
    }
  }
  const Tensor x_gen = model::reconstruct_x(model, z1, y_anchor);
  const Tensor y_gen = repredict(model, x_gen);
  const double mae = mean_abs_diff(y_anchor, y_gen);
  if (!std::isfinite(mae)) throw nd::NumericError("invariance MAE is not finite");
  return mae;
}

SparsityReport sparsity_report(const model::CycleVibModel& model, const Tensor& test_x) {
  require_rows(test_x, 2, "sparsity_report");
  const trainer::LatentStats stats = trainer::latent_stats(model::encode_means(model, test_x));
  SparsityReport r;
  r.sigma_signal = stats.std;
  r.sigma_noise = model.noise_std();
  r.selected.resize(r.sigma_signal.size());
  for (std::size_t d = 0; d < r.selected.size(); ++d) r.selected[d] = r.sigma_signal[d] > r.sigma_noise[d];
  return r;
}

ReconstructionMaes reconstruction_maes(const model::CycleVibModel& model, const Tensor& test_x,
                                       const Tensor& test_y) {
  const auto& c = model.config();
  const Tensor mu = model::encode_means(model, test_x);
  const Tensor y_hat = model::predict_y(model, mu.cols_slice(0, c.d_z0));
  const Tensor x_hat = model::reconstruct_x(model, mu.cols_slice(c.d_z0, c.d_z()), y_hat);
  return ReconstructionMaes{mean_abs_diff(x_hat, test_x), mean_abs_diff(y_hat, test_y)};
}

EvalReport evaluate(const model::CycleVibModel& model, const data::Dataset& dataset,
                    const InvarianceOptions& options) {
  const Tensor test_x = dataset.test_X();
  const Tensor test_y = dataset.test_Y();
  const ReconstructionMaes maes = reconstruction_maes(model, test_x, test_y);
  const SparsityReport sparsity = sparsity_report(model, test_x);
  EvalReport r;
  r.mae_x = maes.mae_x;
  r.mae_y = maes.mae_y;
  r.invariance_mae = invariance_mae(model, test_x, options);
  r.sigma_signal = sparsity.sigma_signal;
  r.sigma_noise = sparsity.sigma_noise;
  r.selected_dims = sparsity.selected;
  r.n_references = std::min(options.n_references, test_x.rows());
  r.n_samples_per_reference = options.n_samples;
  r.d_z0 = model.config().d_z0;
  return r;
}

std::size_t best_snr_dim(const SparsityReport& report, std::size_t begin, std::size_t end) {
  if (begin >= end || end > report.sigma_signal.size()) throw nd::ContractError("best_snr_dim: empty range");
  std::size_t best = begin;
  for (std::size_t d = begin; d < end; ++d) {
    if (report.sigma_signal[d] / report.sigma_noise[d] > report.sigma_signal[best] / report.sigma_noise[best]) {
      best = d;
    }
  }
  return best;
}

TraversalTable traverse(const model::CycleVibModel& model, const data::Dataset& dataset, const TraversalSpec& spec) {
  const auto& c = model.config();
  const Tensor test_x = dataset.test_X();
  require_rows(test_x, 2, "traverse");
  if (spec.steps == 0) throw nd::ContractError("traversal needs at least one step");
  const Tensor mu = model::encode_means(model, test_x);
  const trainer::LatentStats stats = trainer::latent_stats(mu);
  const SparsityReport sparsity = sparsity_report(model, test_x);

  TraversalTable table;
  table.z0_dim = spec.z0_dim ? *spec.z0_dim : best_snr_dim(sparsity, 0, c.d_z0);
  if (table.z0_dim >= c.d_z0) throw nd::ContractError("traversal z0_dim " + std::to_string(table.z0_dim) + " out of range");
  table.z1_dims = spec.z1_dims;
  if (table.z1_dims.empty()) table.z1_dims.push_back(best_snr_dim(sparsity, c.d_z0, c.d_z()) - c.d_z0);
  for (auto d : table.z1_dims) {
    if (d >= c.d_z1) throw nd::ContractError("traversal z1 dim " + std::to_string(d) + " out of range");
  }

  table.z0_values = spec.z0_values;
  if (table.z0_values.empty()) {
    double lo = mu(0, table.z0_dim);
    double hi = lo;
    for (std::size_t r = 0; r < mu.rows(); ++r) {
      lo = std::min(lo, mu(r, table.z0_dim));
      hi = std::max(hi, mu(r, table.z0_dim));
    }
    const std::size_t k = std::max<std::size_t>(spec.n_z0_values, 1);
    for (std::size_t i = 0; i < k; ++i) {
      table.z0_values.push_back(k == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1));
    }
  }

  // grid over the swept z1 dims, row-major in the order given
  const double half_width = spec.extended ? 2.0 : spec.range_std;
  const std::size_t n_swept = table.z1_dims.size();
  std::size_t grid = 1;
  for (std::size_t i = 0; i < n_swept; ++i) grid *= spec.steps;
  const std::size_t total = table.z0_values.size() * grid;

  Tensor z0({total, c.d_z0});
  Tensor z1({total, c.d_z1});
  std::vector<std::vector<double>> swept_coords(total, std::vector<double>(n_swept));
  for (std::size_t v = 0; v < table.z0_values.size(); ++v) {
    for (std::size_t g = 0; g < grid; ++g) {
      const std::size_t row = v * grid + g;
      for (std::size_t j = 0; j < c.d_z0; ++j) z0(row, j) = stats.mean[j];
      z0(row, table.z0_dim) = table.z0_values[v];
      for (std::size_t j = 0; j < c.d_z1; ++j) z1(row, j) = stats.mean[c.d_z0 + j];
      std::size_t rest = g;
      for (std::size_t s = n_swept; s-- > 0;) {
        const std::size_t step = rest % spec.steps;
        rest /= spec.steps;
        const std::size_t d = table.z1_dims[s];
        const double m = stats.mean[c.d_z0 + d];
        const double w = half_width * stats.std[c.d_z0 + d];
        const double t = spec.steps == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(step) / static_cast<double>(spec.steps - 1);
        z1(row, d) = m + w * t;
        swept_coords[row][s] = z1(row, d);
      }
    }
  }

  const Tensor y_anchor = model::predict_y(model, z0);
  const Tensor x_hat = model::reconstruct_x(model, z1, y_anchor);
  const Tensor x_orig = data::unlift(x_hat, dataset.lift);
  const Tensor y_pred = data::unlift_y(repredict(model, x_hat), dataset.lift);
  const Tensor y_anchor_orig = data::unlift_y(y_anchor, dataset.lift);

  table.original_dim = x_orig.cols();
  table.columns.push_back("z0_value");
  for (auto d : table.z1_dims) table.columns.push_back("z1_" + std::to_string(d));
  for (std::size_t i = 0; i < x_orig.cols(); ++i) table.columns.push_back("x_orig_" + std::to_string(i));
  table.columns.push_back("y_pred");
  table.columns.push_back("y_anchor");
  table.rows.reserve(total);
  for (std::size_t row = 0; row < total; ++row) {
    std::vector<double> out;
    out.push_back(z0(row, table.z0_dim));
    out.insert(out.end(), swept_coords[row].begin(), swept_coords[row].end());
    for (std::size_t i = 0; i < x_orig.cols(); ++i) out.push_back(x_orig(row, i));
    out.push_back(y_pred(row, 0));
    out.push_back(y_anchor_orig(row, 0));
    table.rows.push_back(std::move(out));
  }
  return table;
}

void TraversalTable::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw data::IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < columns.size(); ++i) out << (i ? "," : "") << columns[i];
  out << '\n';
  char buf[32];
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.10g", r[i]);
      out << (i ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw data::IoError("failed writing " + path.string());
}

nlohmann::json TraversalTable::metadata() const {
  return nlohmann::json{{"z0_dim", z0_dim},
                        {"z1_dims", z1_dims},
                        {"z0_values", z0_values},
                        {"rows", rows.size()},
                        {"original_dim", original_dim},
                        {"selection_rule", "highest sigma_signal / sigma_noise within each subspace"}};
}

void write_sparsity_csv(const SparsityReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw data::IoError("cannot write " + path.string());
  out << "dim,sigma_signal,sigma_noise,selected\n";
  char buf[96];
  for (std::size_t d = 0; d < report.sigma_signal.size(); ++d) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.10g,%d", d, report.sigma_signal[d], report.sigma_noise[d],
                  report.selected[d] ? 1 : 0);
    out << buf << '\n';
  }
  if (!out) throw data::IoError("failed writing " + path.string());
}

}  // namespace cyclevib::eval
