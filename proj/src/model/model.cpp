#include "cyclevib/model/model.hpp"

#include <cmath>

#include "cyclevib/data/levelset.hpp"

namespace cyclevib::model {

using nd::Var;

std::string to_string(NoiseMode mode) {
  return mode == NoiseMode::kFixedUnit ? "fixed_unit" : "learned_per_dim";
}

NoiseMode noise_mode_from_string(const std::string& name) {
  if (name == "fixed_unit") return NoiseMode::kFixedUnit;
  if (name == "learned_per_dim") return NoiseMode::kLearnedPerDim;
  throw data::ConfigError("unknown noise mode '" + name + "'");
}

void ModelConfig::validate() const {
  if (d_in == 0 || d_y == 0 || d_z0 == 0 || d_z1 == 0) throw data::ConfigError("model dimensions must be positive");
  for (const auto* widths : {&encoder_widths, &decx_widths, &decy_widths}) {
    for (auto w : *widths) {
      if (w == 0) throw data::ConfigError("hidden widths must be positive");
    }
  }
  if (!(lambda > 0.0)) throw data::ConfigError("lambda must be > 0");
  if (!(beta >= 0.0)) throw data::ConfigError("beta must be >= 0");
}

CycleVibModel::CycleVibModel(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  nd::Rng rng(config_.seed, nd::Stream::kInit);
  const auto act = config_.hidden_activation;
  encoder_ = nd::make_mlp("encoder", config_.d_in, config_.encoder_widths, config_.d_z(), act, rng);
  dec_y_ = nd::make_mlp("dec_y", config_.d_z0, config_.decy_widths, config_.d_y, act, rng);
  dec_x_ = nd::make_mlp("dec_x", config_.d_z1 + config_.d_y, config_.decx_widths, config_.d_in, act, rng);
  if (config_.noise_mode == NoiseMode::kLearnedPerDim) {
    log_noise_ = nd::Parameter{"log_noise", nd::Tensor({config_.d_z()})};
  }
  check_structure();
}

CycleVibModel::CycleVibModel(ModelConfig config, std::vector<nd::DenseLayer> encoder,
                             std::vector<nd::DenseLayer> dec_y, std::vector<nd::DenseLayer> dec_x,
                             std::optional<nd::Parameter> log_noise)
    : config_(std::move(config)),
      encoder_(std::move(encoder)),
      dec_y_(std::move(dec_y)),
      dec_x_(std::move(dec_x)),
      log_noise_(std::move(log_noise)) {
  config_.validate();
  check_structure();
}

void CycleVibModel::check_structure() const {
  auto check_chain = [](const std::vector<nd::DenseLayer>& layers, std::size_t in, std::size_t out,
                        const char* what) {
    if (layers.empty()) throw data::ConfigError(std::string(what) + " has no layers");
    std::size_t prev = in;
    for (const auto& l : layers) {
      if (l.in_features() != prev || l.bias.value.size() != l.out_features()) {
        throw nd::DimensionError(std::string(what) + ": inconsistent layer '" + l.weights.name + "'");
      }
      prev = l.out_features();
    }
    if (prev != out) throw nd::DimensionError(std::string(what) + ": output extent " + std::to_string(prev));
  };
  check_chain(encoder_, config_.d_in, config_.d_z(), "encoder");
  check_chain(dec_y_, config_.d_z0, config_.d_y, "dec_y");
  check_chain(dec_x_, config_.d_z1 + config_.d_y, config_.d_in, "dec_x");
  const bool learned = config_.noise_mode == NoiseMode::kLearnedPerDim;
  if (learned != log_noise_.has_value()) {
    throw data::ConfigError("log_noise parameters must exist exactly in learned_per_dim mode");
  }
  if (log_noise_ && log_noise_->value.size() != config_.d_z()) {
    throw nd::DimensionError("log_noise must have one entry per latent dimension");
  }
}

std::vector<nd::Parameter*> CycleVibModel::parameters() {
  std::vector<nd::Parameter*> out;
  for (auto* stack : {&encoder_, &dec_y_, &dec_x_}) {
    for (auto& l : *stack) {
      out.push_back(&l.weights);
      out.push_back(&l.bias);
    }
  }
  if (log_noise_) out.push_back(&*log_noise_);
  return out;
}

std::vector<const nd::Parameter*> CycleVibModel::parameters() const {
  auto mut = const_cast<CycleVibModel*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

std::vector<const nd::Parameter*> CycleVibModel::encoder_parameters() const {
  std::vector<const nd::Parameter*> out;
  for (const auto& l : encoder_) {
    out.push_back(&l.weights);
    out.push_back(&l.bias);
  }
  return out;
}

std::size_t CycleVibModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto* p : parameters()) n += p->value.size();
  return n;
}

std::vector<double> CycleVibModel::noise_std() const {
  std::vector<double> out(config_.d_z(), 1.0);
  if (log_noise_) {
    for (std::size_t d = 0; d < out.size(); ++d) out[d] = std::exp(log_noise_->value[d]);
  }
  return out;
}

LatentBatch partition(const CycleVibModel& model, const Var& mu, const Var& z) {
  const std::size_t d0 = model.config().d_z0;
  const std::size_t dz = model.config().d_z();
  return LatentBatch{mu, z, nd::slice_cols(z, 0, d0), nd::slice_cols(z, d0, dz)};
}

namespace {

Var encoder_means(const CycleVibModel& model, const Var& x) {
  if (x.value().rank() != 2 || x.cols() != model.config().d_in) {
    throw nd::DimensionError("encode: expected " + std::to_string(model.config().d_in) + " input columns, got " +
                             nd::shape_string(x.shape()));
  }
  Var mu = nd::forward(model.encoder(), x);
  if (!mu.value().all_finite()) throw nd::NumericError("encoder produced non-finite means");
  return mu;
}

}  // namespace

LatentBatch encode_with_eps(const CycleVibModel& model, const Var& x, const nd::Tensor& eps) {
  Var mu = encoder_means(model, x);
  if (eps.shape() != mu.shape()) {
    throw nd::DimensionError("encode: eps shape " + nd::shape_string(eps.shape()) + " != " +
                             nd::shape_string(mu.shape()));
  }
  nd::Tape& tape = x.tape();
  Var noise = tape.constant(eps);
  if (const auto& ln = model.log_noise()) noise = nd::mul(noise, nd::exp(tape.parameter(*ln)));
  return partition(model, mu, nd::add(mu, noise));
}

LatentBatch encode(const CycleVibModel& model, const Var& x, nd::Rng* noise) {
  if (noise == nullptr) {
    Var mu = encoder_means(model, x);
    return partition(model, mu, mu);
  }
  const nd::Shape shape{x.rows(), model.config().d_z()};
  return encode_with_eps(model, x, noise->normal(shape));
}

Var decode_y(const CycleVibModel& model, const Var& z0) {
  if (z0.value().rank() != 2 || z0.cols() != model.config().d_z0) {
    throw nd::DimensionError("decode_y: expected " + std::to_string(model.config().d_z0) + " columns, got " +
                             nd::shape_string(z0.shape()));
  }
  return nd::forward(model.dec_y(), z0);
}

Var decode_x(const CycleVibModel& model, const Var& z1, const Var& y_hat) {
  const auto& c = model.config();
  if (z1.value().rank() != 2 || z1.cols() != c.d_z1) {
    throw nd::DimensionError("decode_x: expected " + std::to_string(c.d_z1) + " z1 columns, got " +
                             nd::shape_string(z1.shape()));
  }
  if (y_hat.value().rank() != 2 || y_hat.cols() != c.d_y || y_hat.rows() != z1.rows()) {
    throw nd::DimensionError("decode_x: y_hat shape " + nd::shape_string(y_hat.shape()) + " incompatible with z1 " +
                             nd::shape_string(z1.shape()));
  }
  return nd::forward(model.dec_x(), nd::concat({z1, y_hat}, nd::Axis::kCols));
}

CycleOutputs full_cycle(const CycleVibModel& model, const Var& x, nd::Rng* noise) {
  LatentBatch latent = encode(model, x, noise);
  Var y_hat = decode_y(model, latent.z0);
  Var x_hat = decode_x(model, latent.z1, y_hat);
  return CycleOutputs{x_hat, y_hat, latent};
}

nd::Tensor encode_means(const CycleVibModel& model, const nd::Tensor& x) {
  nd::Tape tape;
  return encode(model, tape.constant(x), nullptr).mu.value();
}

nd::Tensor predict_y(const CycleVibModel& model, const nd::Tensor& z0) {
  nd::Tape tape;
  return decode_y(model, tape.constant(z0)).value();
}

nd::Tensor reconstruct_x(const CycleVibModel& model, const nd::Tensor& z1, const nd::Tensor& y_hat) {
  nd::Tape tape;
  return decode_x(model, tape.constant(z1), tape.constant(y_hat)).value();
}

}  // namespace cyclevib::model
