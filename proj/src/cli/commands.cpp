#include "cyclevib/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "cyclevib/model/checkpoint.hpp"
#include "cyclevib/util/log.hpp"

namespace cyclevib::cli {

namespace fs = std::filesystem;
using data::ConfigError;

Assertion parse_assertion(const std::string& text) {
  static const char* const kOps[] = {"<=", ">=", "==", "<", ">"};
  for (const char* op : kOps) {
    const auto pos = text.find(op);
    if (pos == std::string::npos) continue;
    Assertion a;
    a.text = text;
    a.op = op;
    a.metric = text.substr(0, pos);
    if (a.metric == "invariance_mae") a.metric = "invariance";
    const std::string rhs = text.substr(pos + a.op.size());
    try {
      std::size_t used = 0;
      a.threshold = std::stod(rhs, &used);
      if (used != rhs.size()) throw std::invalid_argument(rhs);
    } catch (const std::exception&) {
      throw ConfigError("assertion '" + text + "': bad threshold '" + rhs + "'");
    }
    eval::EvalReport probe;
    probe.selected_dims.assign(1, false);
    metric_value(probe, a.metric);  // rejects unknown metric names
    return a;
  }
  throw ConfigError("assertion '" + text + "' has no comparison operator");
}

double metric_value(const eval::EvalReport& r, const std::string& metric) {
  if (metric == "mae_x") return r.mae_x;
  if (metric == "mae_y") return r.mae_y;
  if (metric == "invariance" || metric == "invariance_mae") return r.invariance_mae;
  if (metric == "selected_z0") return static_cast<double>(r.selected_in_z0());
  if (metric == "selected_z1") return static_cast<double>(r.selected_in_z1());
  throw ConfigError("unknown assertion metric '" + metric + "'");
}

bool holds(const Assertion& a, const eval::EvalReport& report) {
  const double v = metric_value(report, a.metric);
  if (a.op == "<=") return v <= a.threshold;
  if (a.op == ">=") return v >= a.threshold;
  if (a.op == "<") return v < a.threshold;
  if (a.op == ">") return v > a.threshold;
  return v == a.threshold;
}

void apply_beta_vae_baseline(RunConfig& config) {
  config.weights.beta = 0.0;
  config.train.compression = trainer::Compression::kStandardKl;
  config.model.noise_mode = model::NoiseMode::kLearnedPerDim;
}

namespace {

bool dataset_present(const fs::path& stem) {
  fs::path csv = stem;
  csv += ".csv";
  fs::path json = stem;
  json += ".json";
  return fs::exists(csv) && fs::exists(json);
}

void echo_config(const RunConfig& config, const fs::path& dir) { write_ini(config, dir / "config.ini"); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw data::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw data::IoError("failed writing " + path.string());
}

void write_curve(const std::vector<trainer::LoggedReport>& history, const fs::path& path) {
  std::string text;
  const auto& header = objectives::loss_csv_header();
  for (std::size_t i = 0; i < header.size(); ++i) text += (i ? "," : "") + header[i];
  text += "\n";
  for (const auto& h : history) text += objectives::loss_csv_row(static_cast<long>(h.step), h.report) + "\n";
  write_text(path, text);
}

nlohmann::json report_json(const objectives::LossReport& r) {
  return {{"compression", r.compression}, {"nll_x", r.nll_x},
          {"nll_y", r.nll_y},             {"cycle_recon", r.cycle_recon},
          {"cycle_sample", r.cycle_sample}, {"cycle_fixed", r.cycle_fixed},
          {"total", r.total}};
}

trainer::TrainState train_on(const RunConfig& config, const data::Dataset& ds, bool verbose) {
  trainer::FitOptions options;
  options.checkpoint_stem = config.paths.checkpoint_stem();
  const std::size_t every = std::max<std::size_t>(1, config.train.epochs / 10);
  if (verbose) {
    options.on_epoch = [&](const trainer::TrainState& s) {
      if (s.epoch % static_cast<std::int64_t>(every) != 0 || s.history.empty()) return;
      char buf[160];
      const auto& r = s.history.back().report;
      std::snprintf(buf, sizeof(buf), "epoch %ld/%zu  total %.4f  nll_x %.4f  nll_y %.4f  compression %.4f",
                    static_cast<long>(s.epoch), config.train.epochs, r.total, r.nll_x, r.nll_y, r.compression);
      log::info(buf);
    };
  }
  trainer::TrainState state = trainer::fit(ds, config.model, config.train, config.weights, options);
  write_curve(state.history, config.paths.report_dir() / "train_curve.csv");
  nlohmann::json metrics = nlohmann::json::object();
  if (!state.history.empty()) metrics["last_report"] = report_json(state.history.back().report);
  model::save_checkpoint(config.paths.checkpoint_stem(), state.model, &state.optimizer,
                         model::CheckpointInfo{state.step, state.epoch, metrics});
  echo_config(config, config.paths.checkpoint_stem().parent_path());
  echo_config(config, config.paths.report_dir());
  return state;
}

eval::EvalReport evaluate_and_write(const RunConfig& config, const model::CycleVibModel& m, const data::Dataset& ds) {
  const eval::EvalReport report = eval::evaluate(m, ds, config.invariance);
  const fs::path dir = config.paths.report_dir();
  write_text(dir / "eval_report.json", to_json(report).dump(2) + "\n");
  eval::SparsityReport sparsity{report.sigma_signal, report.sigma_noise, report.selected_dims};
  eval::write_sparsity_csv(sparsity, dir / "sparsity.csv");
  echo_config(config, dir);
  return report;
}

std::string format_report(const eval::EvalReport& r) {
  char buf[200];
  std::snprintf(buf, sizeof(buf), "mae_x %.4f  mae_y %.4f  invariance %.4f  selected Z0 %zu  Z1 %zu", r.mae_x,
                r.mae_y, r.invariance_mae, r.selected_in_z0(), r.selected_in_z1());
  return buf;
}

}  // namespace

data::Dataset obtain_dataset(const RunConfig& config) {
  const fs::path stem = config.paths.dataset_stem();
  if (dataset_present(stem)) return data::load_dataset(stem);
  return data::generate(config.data);
}

void cmd_gen_data(const RunConfig& config) {
  const data::Dataset ds = data::generate(config.data);
  const fs::path stem = config.paths.dataset_stem();
  if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
  data::save_dataset(ds, stem);
  echo_config(config, stem.parent_path().empty() ? fs::path(".") : stem.parent_path());
  log::info("wrote " + std::to_string(ds.size()) + " rows (" + std::to_string(ds.train_index.size()) + " train, " +
            std::to_string(ds.test_index.size()) + " test), seed " + std::to_string(config.data.seed) + " -> " +
            stem.string() + ".csv");
}

void cmd_train(const RunConfig& config) {
  const data::Dataset ds = obtain_dataset(config);
  if (ds.X.cols() != config.model.d_in || ds.Y.cols() != config.model.d_y) {
    throw ConfigError("dataset has " + std::to_string(ds.X.cols()) + "/" + std::to_string(ds.Y.cols()) +
                      " X/Y columns, model expects " + std::to_string(config.model.d_in) + "/" +
                      std::to_string(config.model.d_y));
  }
  const trainer::TrainState state = train_on(config, ds, true);
  log::info("trained " + std::to_string(state.epoch) + " epochs (" + std::to_string(state.step) +
            " steps); checkpoint " + config.paths.checkpoint_stem().string());
}

eval::EvalReport cmd_eval(const RunConfig& config, const std::vector<Assertion>& assertions,
                          std::vector<Assertion>* failed) {
  const model::Checkpoint ck = model::load_checkpoint(config.paths.checkpoint_stem());
  const data::Dataset ds = obtain_dataset(config);
  const eval::EvalReport report = evaluate_and_write(config, ck.model, ds);
  log::info(format_report(report));
  for (const auto& a : assertions) {
    const bool ok = holds(a, report);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s %s (value %.6g)", ok ? "PASS" : "FAIL", a.text.c_str(),
                  metric_value(report, a.metric));
    log::info(buf);
    if (!ok && failed) failed->push_back(a);
  }
  return report;
}

eval::TraversalTable cmd_traverse(const RunConfig& config) {
  const model::Checkpoint ck = model::load_checkpoint(config.paths.checkpoint_stem());
  const data::Dataset ds = obtain_dataset(config);
  const eval::TraversalTable table = eval::traverse(ck.model, ds, config.traversal);
  const fs::path dir = config.paths.report_dir();
  fs::create_directories(dir);
  table.write_csv(dir / "traversal.csv");
  write_text(dir / "traversal.json", table.metadata().dump(2) + "\n");
  echo_config(config, dir);
  std::string dims;
  for (auto d : table.z1_dims) dims += (dims.empty() ? "" : ",") + std::to_string(d);
  log::info("traversal: Z0 dim " + std::to_string(table.z0_dim) + ", Z1 dims " + dims + ", " +
            std::to_string(table.rows.size()) + " rows -> " + (dir / "traversal.csv").string());
  return table;
}

std::optional<std::size_t> select_sweep_point(const std::vector<SweepPoint>& points, double tolerance) {
  if (points.empty()) return std::nullopt;
  double best_x = points[0].report.mae_x;
  double best_y = points[0].report.mae_y;
  for (const auto& p : points) {
    best_x = std::min(best_x, p.report.mae_x);
    best_y = std::min(best_y, p.report.mae_y);
  }
  std::optional<std::size_t> chosen;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (p.report.mae_x > (1.0 + tolerance) * best_x || p.report.mae_y > (1.0 + tolerance) * best_y) continue;
    if (!chosen) {
      chosen = i;
      continue;
    }
    const auto& c = points[*chosen];
    if (p.beta > c.beta || (p.beta == c.beta && p.lambda < c.lambda)) chosen = i;
  }
  return chosen;
}

namespace {

std::string weight_tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace

std::vector<SweepPoint> cmd_sweep(const RunConfig& config, const std::vector<double>& lambdas,
                                  const std::vector<double>& betas, std::size_t jobs, double tolerance) {
  if (lambdas.empty() || betas.empty()) throw ConfigError("sweep needs at least one lambda and one beta");
  const data::Dataset ds = obtain_dataset(config);
  std::vector<SweepPoint> points;
  std::vector<RunConfig> configs;
  for (double l : lambdas) {
    for (double b : betas) {
      RunConfig c = config;
      c.weights.lambda = l;
      c.weights.beta = b;
      c.paths.root = config.paths.root / "sweep" / ("lambda" + weight_tag(l) + "_beta" + weight_tag(b));
      c.paths.checkpoint.clear();
      c.paths.reports.clear();
      c.resolve();
      configs.push_back(std::move(c));
      points.push_back(SweepPoint{l, b, {}});
    }
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        const trainer::TrainState state = train_on(configs[i], ds, false);
        points[i].report = evaluate_and_write(configs[i], state.model, ds);
        log::info("sweep lambda=" + weight_tag(points[i].lambda) + " beta=" + weight_tag(points[i].beta) + ": " +
                  format_report(points[i].report));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, configs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  const auto chosen = select_sweep_point(points, tolerance);
  std::string csv = "lambda,beta,mae_x,mae_y,invariance_mae,selected_z0,selected_z1,chosen\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& r = points[i].report;
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g,%.10g,%zu,%zu,%d\n", points[i].lambda, points[i].beta,
                  r.mae_x, r.mae_y, r.invariance_mae, r.selected_in_z0(), r.selected_in_z1(),
                  chosen && *chosen == i ? 1 : 0);
    csv += buf;
  }
  const fs::path dir = config.paths.root / "sweep";
  write_text(dir / "sweep_report.csv", csv);
  echo_config(config, dir);
  if (chosen) {
    log::info("sweep choice: lambda=" + weight_tag(points[*chosen].lambda) +
              " beta=" + weight_tag(points[*chosen].beta));
  }
  return points;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"cyclevib: partitioned-latent information bottleneck with cycle-consistent property invariance"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> assignments;
  std::string out_dir, data_path, checkpoint_path, shape, baseline;
  std::optional<std::size_t> n_points, epochs;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda, beta;
  std::vector<std::string> assertion_texts;
  std::optional<std::size_t> z0_dim, steps, n_z0_values;
  std::vector<std::size_t> z1_dims;
  bool extended = false;
  std::vector<double> lambdas{0.1, 1, 10, 100}, betas{0.1, 1, 10};
  std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
  double tolerance = 0.25;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "INI file overlaying the defaults")->check(CLI::ExistingFile);
    sub->add_option("--set", assignments, "Section.key=value override (repeatable)");
    sub->add_option("--out", out_dir, "Output root directory");
    sub->add_option("--data", data_path, "Dataset stem");
    sub->add_option("--checkpoint", checkpoint_path, "Checkpoint stem");
    sub->add_option("--shape", shape, "ellipse or ellipsoid")->check(CLI::IsMember({"ellipse", "ellipsoid"}));
    sub->add_option("--n", n_points, "Number of data points");
    sub->add_option("--seed", seed, "Seed for data, model, training and evaluation");
    sub->add_option("--epochs", epochs, "Training epochs");
    sub->add_option("--lambda", lambda, "Likelihood weight");
    sub->add_option("--beta", beta, "Cycle weight");
    sub->add_option("--baseline", baseline, "beta-vae: no cycle, standard KL, learned noise")
        ->check(CLI::IsMember({"beta-vae"}));
  };
  CLI::App* gen = app.add_subcommand("gen-data", "Generate a lifted level-set dataset");
  CLI::App* train = app.add_subcommand("train", "Train a model and write checkpoint and curve");
  CLI::App* evalc = app.add_subcommand("eval", "Evaluate a checkpoint");
  CLI::App* trav = app.add_subcommand("traverse", "Export a latent traversal table");
  CLI::App* sweep = app.add_subcommand("sweep", "Train and evaluate a lambda x beta grid");
  for (auto* s : {gen, train, evalc, trav, sweep}) add_common(s);
  evalc->add_option("--assert", assertion_texts, "Threshold such as invariance<=0.02 (repeatable)");
  trav->add_option("--z0-dim", z0_dim, "Z0 index to fix (default: highest signal-to-noise)");
  trav->add_option("--z1-dims", z1_dims, "Z1 indices to sweep")->delimiter(',');
  trav->add_option("--steps", steps, "Grid points per swept dimension");
  trav->add_option("--n-z0-values", n_z0_values, "Number of Z0 values");
  trav->add_flag("--extended", extended, "Sweep +-2 std instead of +-1");
  sweep->add_option("--lambdas", lambdas, "Lambda grid")->delimiter(',');
  sweep->add_option("--betas", betas, "Beta grid")->delimiter(',');
  sweep->add_option("--jobs", jobs, "Concurrent training jobs");
  sweep->add_option("--tolerance", tolerance, "Allowed relative MAE degradation for the sweep choice");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    RunConfig config = default_run_config(shape == "ellipsoid" ? 3 : 2);
    if (!config_path.empty()) load_ini(config, config_path);
    for (const auto& a : assignments) apply_assignment(config, a);
    if (!shape.empty()) config.data.dim = shape == "ellipsoid" ? 3 : 2;
    if (!out_dir.empty()) config.paths.root = out_dir;
    if (!data_path.empty()) config.paths.dataset = data_path;
    if (!checkpoint_path.empty()) config.paths.checkpoint = checkpoint_path;
    if (n_points) config.data.n_points = *n_points;
    if (seed) config.data.seed = config.model.seed = config.train.seed = config.invariance.seed = *seed;
    if (epochs) config.train.epochs = *epochs;
    if (lambda) config.weights.lambda = *lambda;
    if (beta) config.weights.beta = *beta;
    if (baseline == "beta-vae") apply_beta_vae_baseline(config);
    if (z0_dim) config.traversal.z0_dim = *z0_dim;
    if (!z1_dims.empty()) config.traversal.z1_dims = z1_dims;
    if (steps) config.traversal.steps = *steps;
    if (n_z0_values) config.traversal.n_z0_values = *n_z0_values;
    if (extended) config.traversal.extended = true;
    config.resolve();

    if (*gen) {
      cmd_gen_data(config);
    } else if (*train) {
      cmd_train(config);
    } else if (*evalc) {
      std::vector<Assertion> assertions;
      for (const auto& t : assertion_texts) assertions.push_back(parse_assertion(t));
      std::vector<Assertion> failed;
      cmd_eval(config, assertions, &failed);
      if (!failed.empty()) return kAssertionFailed;
    } else if (*trav) {
      cmd_traverse(config);
    } else if (*sweep) {
      cmd_sweep(config, lambdas, betas, jobs, tolerance);
    }
    return kOk;
  } catch (const data::ConfigError& e) {
    log::error(std::string("configuration error: ") + e.what());
    return kConfigError;
  } catch (const nd::ContractError& e) {
    log::error(std::string("configuration error: ") + e.what());
    return kConfigError;
  } catch (const nd::DimensionError& e) {
    log::error(std::string("configuration error: ") + e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    log::error(e.what());
    return kRuntimeError;
  }
}

}  // namespace cyclevib::cli
