#include "cyclevib/trainer/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "cyclevib/model/checkpoint.hpp"
#include "cyclevib/util/log.hpp"

namespace cyclevib::trainer {

using nd::Tensor;
using nd::Var;

std::string to_string(Compression c) { return c == Compression::kSparse ? "sparse" : "standard_kl"; }

Compression compression_from_string(const std::string& name) {
  if (name == "sparse") return Compression::kSparse;
  if (name == "standard_kl") return Compression::kStandardKl;
  throw data::ConfigError("unknown compression '" + name + "'");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw data::ConfigError("batch_size must be positive");
  if (!(lr > 0.0)) throw data::ConfigError("lr must be > 0");
  if (!(lr_final_fraction > 0.0 && lr_final_fraction <= 1.0)) {
    throw data::ConfigError("lr_final_fraction must lie in (0, 1]");
  }
  if (log_every == 0) throw data::ConfigError("log_every must be positive");
}

LatentStats latent_stats(const Tensor& codes) {
  const std::size_t n = codes.rows();
  const std::size_t d = codes.cols();
  LatentStats s{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  if (n == 0) return s;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += codes(r, j);
  }
  for (auto& m : s.mean) m /= static_cast<double>(n);
  if (n < 2) return s;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = codes(r, j) - s.mean[j];
      s.std[j] += dev * dev;
    }
  }
  for (auto& v : s.std) v = std::sqrt(v / static_cast<double>(n - 1));
  return s;
}

namespace {

// Fills columns [offset, offset + dims) of `out` from U[mean - std, mean + std];
// zero-spread dimensions stay at the mean.
void fill_box(Tensor& out, std::size_t offset, std::span<const double> mean, std::span<const double> spread,
              nd::Rng& rng) {
  bool warned = false;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (std::size_t j = 0; j < mean.size(); ++j) {
      if (spread[j] > 0.0) {
        out(r, offset + j) = mean[j] + spread[j] * rng.uniform(-1.0, 1.0);
      } else {
        out(r, offset + j) = mean[j];
        if (!warned && r == 0) {
          log::warn("latent dimension " + std::to_string(offset + j) + " has zero spread; sampling at its mean");
          warned = true;
        }
      }
    }
  }
}

Var repeat_rows(const Var& v, std::size_t count) {
  const std::size_t n = v.rows();
  if (count == n) return v;
  std::vector<Var> parts;
  for (std::size_t done = 0; done < count; done += n) {
    parts.push_back(count - done >= n ? v : nd::slice_rows(v, 0, count - done));
  }
  return parts.size() == 1 ? parts.front() : nd::concat(parts, nd::Axis::kRows);
}

Tensor repeat_rows(const Tensor& t, std::size_t count) {
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i % t.rows();
  return nd::take_rows(t, idx);
}

}  // namespace

Tensor sample_uniform_latent(const LatentStats& stats, std::size_t count, nd::Rng& rng) {
  const std::size_t d = stats.mean.size();
  if (stats.std.size() != d) throw nd::DimensionError("latent stats mean/std length mismatch");
  Tensor out({count, d});
  const bool all_zero = std::all_of(stats.std.begin(), stats.std.end(), [](double s) { return !(s > 0.0); });
  if (all_zero && d > 0) {
    log::warn("latent batch has zero spread in every dimension; sampling in mean +- 1");
    const std::vector<double> ones(d, 1.0);
    fill_box(out, 0, stats.mean, ones, rng);
  } else {
    fill_box(out, 0, stats.mean, stats.std, rng);
  }
  return out;
}

Tensor sample_fixed_z0(std::span<const double> z0_anchor, const LatentStats& stats, std::size_t count,
                       nd::Rng& rng) {
  const std::size_t d0 = z0_anchor.size();
  const std::size_t d = stats.mean.size();
  if (d0 > d || stats.std.size() != d) throw nd::DimensionError("sample_fixed_z0: anchor longer than latent stats");
  Tensor out({count, d});
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t j = 0; j < d0; ++j) out(r, j) = z0_anchor[j];
  }
  fill_box(out, d0, std::span(stats.mean).subspan(d0), std::span(stats.std).subspan(d0), rng);
  return out;
}

TrainState make_train_state(const model::ModelConfig& model_config, const TrainConfig& train_config) {
  train_config.validate();
  model::CycleVibModel m(model_config);
  auto opt = nd::make_optimizer_state(m.parameters(), nd::AdamOptions{train_config.lr});
  return TrainState{std::move(m), std::move(opt), 0, 0, {}};
}

StepGraph build_step(nd::Tape& tape, const model::CycleVibModel& model, const Tensor& x_batch, const Tensor& y_batch,
                     const objectives::LossWeights& weights, const TrainConfig& config, StepRngs& rngs) {
  const auto& mc = model.config();
  if (x_batch.rank() != 2 || x_batch.cols() != mc.d_in || y_batch.rank() != 2 || y_batch.cols() != mc.d_y ||
      x_batch.rows() != y_batch.rows() || x_batch.rows() == 0) {
    throw nd::DimensionError("train batch shapes " + nd::shape_string(x_batch.shape()) + " / " +
                             nd::shape_string(y_batch.shape()) + " do not match the model");
  }
  const std::size_t batch = x_batch.rows();

  // (a) encode with sampling noise, predict Y from Z0, reconstruct X from (Z1, Y_hat)
  Var x = tape.constant(x_batch);
  Var y = tape.constant(y_batch);
  model::CycleOutputs out = model::full_cycle(model, x, &rngs.noise);

  StepGraph g;
  g.x_hat = out.x_hat;
  g.y_hat = out.y_hat;
  if (config.compression == Compression::kSparse) {
    g.parts.compression = objectives::sparse_compression(out.latent.mu);
  } else {
    Var log_noise = model.log_noise() ? tape.parameter(*model.log_noise()) : tape.constant(Tensor({mc.d_z()}));
    g.parts.compression = objectives::standard_kl(out.latent.mu, log_noise);
  }
  g.parts.nll_x = objectives::gaussian_nll(x, out.x_hat);
  g.parts.nll_y = objectives::gaussian_nll(y, out.y_hat);

  if (weights.beta > 0.0) {
    // (b) sample around the current batch's mean codes
    const LatentStats stats = latent_stats(out.latent.mu.value());
    const std::size_t n_uniform = config.uniform_count();
    const std::size_t n_fixed = config.fixed_count();

    Var z_uniform = tape.constant(sample_uniform_latent(stats, n_uniform, rngs.latent));
    Var y_tilde = model::decode_y(model, nd::slice_cols(z_uniform, 0, mc.d_z0));
    Var x_tilde = model::decode_x(model, nd::slice_cols(z_uniform, mc.d_z0, mc.d_z()), y_tilde);

    // one fixed-Z0 sample per anchor row; anchors reuse their differentiable Y_hat
    const Tensor anchors = repeat_rows(out.latent.z0.value(), n_fixed);
    Tensor z_fixed({n_fixed, mc.d_z()});
    for (std::size_t r = 0; r < n_fixed; ++r) {
      const Tensor code = sample_fixed_z0(anchors.row(r), stats, 1, rngs.latent);
      std::copy(code.data().begin(), code.data().end(), z_fixed.data().begin() + static_cast<std::ptrdiff_t>(r * mc.d_z()));
    }
    Var y_anchor = repeat_rows(out.y_hat, n_fixed);
    Var x_fixed = model::decode_x(model, tape.constant(z_fixed.cols_slice(mc.d_z0, mc.d_z())), y_anchor);

    // (c) second pass over X^c = [X_hat; X_tilde; X_tilde*], means only
    Var x_cycle = nd::concat({out.x_hat, x_tilde, x_fixed}, nd::Axis::kRows);
    g.cycle_batch_rows = x_cycle.rows();
    model::LatentBatch second = model::encode(model, x_cycle, nullptr);
    Var y_cycle = model::decode_y(model, second.z0);
    Var y_hat_prime = nd::slice_rows(y_cycle, 0, batch);
    Var y_tilde_prime = nd::slice_rows(y_cycle, batch, batch + n_uniform);
    Var y_tilde_star = nd::slice_rows(y_cycle, batch + n_uniform, g.cycle_batch_rows);
    g.parts.cycle = objectives::cycle_loss(out.y_hat, y_hat_prime, y_tilde, y_tilde_prime, y_anchor, y_tilde_star);
  }

  g.total = objectives::total_loss(g.parts, weights);
  return g;
}

objectives::LossReport train_step(TrainState& state, const Tensor& x_batch, const Tensor& y_batch,
                                  const objectives::LossWeights& weights, const TrainConfig& config, StepRngs& rngs) {
  weights.validate();
  nd::Tape tape;
  StepGraph g = build_step(tape, state.model, x_batch, y_batch, weights, config, rngs);
  const nd::Gradients grads = tape.backward(g.total);

  auto params = state.model.parameters();
  std::vector<Tensor> gs;
  gs.reserve(params.size());
  for (const auto* p : params) gs.push_back(grads.has(*p) ? grads.of(*p) : Tensor(p->value.shape()));
  nd::optimizer_step(params, gs, state.optimizer);
  ++state.step;
  return objectives::make_report(g.parts, g.total);
}

double cycle_weight(const TrainConfig& config, double beta, std::size_t epoch) {
  if (epoch < config.cycle_start_epoch) return 0.0;
  if (config.cycle_ramp_epochs == 0) return beta;
  const double progress =
      static_cast<double>(epoch - config.cycle_start_epoch + 1) / static_cast<double>(config.cycle_ramp_epochs);
  return beta * std::min(1.0, progress);
}

double learning_rate(const TrainConfig& config, std::size_t epoch) {
  if (config.lr_final_fraction >= 1.0 || config.epochs <= 1) return config.lr;
  const double t = static_cast<double>(epoch) / static_cast<double>(config.epochs - 1);
  const double f = config.lr_final_fraction;
  return config.lr * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(std::numbers::pi * t)));
}

namespace {

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return nd::splitmix64(seed ^ nd::splitmix64(static_cast<std::uint64_t>(epoch) + 1));
}

void write_checkpoint(const std::filesystem::path& stem, const TrainState& s) {
  model::CheckpointInfo info{s.step, s.epoch, nlohmann::json::object()};
  if (!s.history.empty()) info.metrics = {{"last_total", s.history.back().report.total}};
  model::save_checkpoint(stem, s.model, &s.optimizer, info);
}

}  // namespace

TrainState fit(const data::Dataset& dataset, const model::ModelConfig& model_config, const TrainConfig& config,
               const objectives::LossWeights& weights, const FitOptions& options) {
  config.validate();
  weights.validate();
  model_config.validate();
  if (dataset.X.cols() != model_config.d_in || dataset.Y.cols() != model_config.d_y) {
    throw data::ConfigError("dataset has " + std::to_string(dataset.X.cols()) + "/" +
                            std::to_string(dataset.Y.cols()) + " X/Y columns but the model expects " +
                            std::to_string(model_config.d_in) + "/" + std::to_string(model_config.d_y));
  }
  if (dataset.train_index.empty()) throw data::ConfigError("dataset has an empty training split");

  TrainState state = [&] {
    if (!options.resume_from) return make_train_state(model_config, config);
    model::Checkpoint ck = model::load_checkpoint(*options.resume_from);
    auto opt = ck.optimizer ? std::move(*ck.optimizer)
                            : nd::make_optimizer_state(ck.model.parameters(), nd::AdamOptions{config.lr});
    return TrainState{std::move(ck.model), std::move(opt), ck.info.epoch, ck.info.step, {}};
  }();

  const Tensor x_train = dataset.train_X();
  const Tensor y_train = dataset.train_Y();
  const std::size_t n = x_train.rows();
  const std::size_t batch = std::min(config.batch_size, n);
  const std::size_t n_batches = n / batch;  // the remainder rotates through later epochs via reshuffling

  std::vector<std::size_t> order(n);
  for (auto epoch = static_cast<std::size_t>(state.epoch); epoch < config.epochs; ++epoch) {
    const std::uint64_t es = epoch_seed(config.seed, epoch);
    nd::Rng shuffle(es, nd::Stream::kShuffle);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle.engine());
    StepRngs rngs{nd::Rng(es, nd::Stream::kNoise), nd::Rng(es, nd::Stream::kLatent)};

    const objectives::LossWeights w{weights.lambda, cycle_weight(config, weights.beta, epoch)};
    state.optimizer.options.learning_rate = learning_rate(config, epoch);

    for (std::size_t b = 0; b < n_batches; ++b) {
      std::span<const std::size_t> idx(order.data() + b * batch, batch);
      const Tensor xb = nd::take_rows(x_train, idx);
      const Tensor yb = nd::take_rows(y_train, idx);
      const objectives::LossReport report = train_step(state, xb, yb, w, config, rngs);
      if ((state.step - 1) % static_cast<std::int64_t>(config.log_every) == 0) {
        state.history.push_back(LoggedReport{state.step, report});
      }
    }
    state.epoch = static_cast<std::int64_t>(epoch + 1);
    if (options.checkpoint_stem && config.checkpoint_every > 0 && state.epoch % static_cast<std::int64_t>(config.checkpoint_every) == 0) {
      write_checkpoint(*options.checkpoint_stem, state);
    }
    if (options.on_epoch) options.on_epoch(state);
  }
  if (options.checkpoint_stem) write_checkpoint(*options.checkpoint_stem, state);
  return state;
}

}  // namespace cyclevib::trainer
