#include "cyclevib/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "cyclevib/data/levelset.hpp"

namespace cyclevib::model {

static_assert(std::endian::native == std::endian::little, "checkpoint blobs are written in host order");

namespace {

constexpr const char* kFormat = "cyclevib-checkpoint";
constexpr int kVersion = 1;

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

void append(std::vector<unsigned char>& blob, const nd::Tensor& t) {
  const auto* p = reinterpret_cast<const unsigned char*>(t.data().data());
  blob.insert(blob.end(), p, p + t.size() * sizeof(double));
}

void read_into(const std::vector<unsigned char>& blob, std::size_t& offset, nd::Tensor& t) {
  const std::size_t bytes = t.size() * sizeof(double);
  if (offset + bytes > blob.size()) throw data::IoError("checkpoint blob is truncated");
  std::memcpy(t.data().data(), blob.data() + offset, bytes);
  offset += bytes;
}

}  // namespace

nlohmann::json config_to_json(const ModelConfig& c) {
  return nlohmann::json{{"d_in", c.d_in},
                        {"d_y", c.d_y},
                        {"d_z0", c.d_z0},
                        {"d_z1", c.d_z1},
                        {"encoder_widths", c.encoder_widths},
                        {"decx_widths", c.decx_widths},
                        {"decy_widths", c.decy_widths},
                        {"noise_mode", to_string(c.noise_mode)},
                        {"hidden_activation", nd::to_string(c.hidden_activation)},
                        {"lambda", c.lambda},
                        {"beta", c.beta},
                        {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d_in = j.at("d_in").get<std::size_t>();
  c.d_y = j.at("d_y").get<std::size_t>();
  c.d_z0 = j.at("d_z0").get<std::size_t>();
  c.d_z1 = j.at("d_z1").get<std::size_t>();
  c.encoder_widths = j.at("encoder_widths").get<std::vector<std::size_t>>();
  c.decx_widths = j.at("decx_widths").get<std::vector<std::size_t>>();
  c.decy_widths = j.at("decy_widths").get<std::vector<std::size_t>>();
  c.noise_mode = noise_mode_from_string(j.at("noise_mode").get<std::string>());
  c.hidden_activation = nd::activation_from_string(j.value("hidden_activation", std::string("tanh")));
  c.lambda = j.at("lambda").get<double>();
  c.beta = j.at("beta").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void save_checkpoint(const std::filesystem::path& stem, const CycleVibModel& model,
                     const nd::OptimizerState* optimizer, const CheckpointInfo& info) {
  const auto manifest_path = std::filesystem::path(stem).replace_extension(".json");
  const auto blob_path = std::filesystem::path(stem).replace_extension(".bin");
  if (manifest_path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(manifest_path.parent_path(), ec);
  }

  std::vector<unsigned char> blob;
  nlohmann::json params = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto* p : model.parameters()) {
    params.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"offset", offset}});
    append(blob, p->value);
    offset += p->value.size() * sizeof(double);
  }
  nlohmann::json opt = nullptr;
  if (optimizer != nullptr) {
    for (const auto& m : optimizer->first_moment) append(blob, m);
    for (const auto& v : optimizer->second_moment) append(blob, v);
    const auto& o = optimizer->options;
    opt = {{"step_count", optimizer->step_count},
           {"learning_rate", o.learning_rate},
           {"beta1", o.beta1},
           {"beta2", o.beta2},
           {"epsilon", o.epsilon}};
  }

  std::ofstream bin(blob_path, std::ios::binary);
  if (!bin) throw data::IoError("cannot write " + blob_path.string());
  bin.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  if (!bin) throw data::IoError("failed writing " + blob_path.string());

  nlohmann::json manifest{{"format", kFormat},
                          {"version", kVersion},
                          {"config", config_to_json(model.config())},
                          {"seed", model.config().seed},
                          {"step", info.step},
                          {"epoch", info.epoch},
                          {"metrics", info.metrics},
                          {"parameters", params},
                          {"optimizer", opt},
                          {"blob", blob_path.filename().string()},
                          {"blob_bytes", blob.size()},
                          {"hash", "fnv1a64:" + hex64(fnv1a64(blob))}};
  std::ofstream js(manifest_path);
  if (!js) throw data::IoError("cannot write " + manifest_path.string());
  js << manifest.dump(2) << '\n';
  if (!js) throw data::IoError("failed writing " + manifest_path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto manifest_path = path;
  if (manifest_path.extension() != ".json") manifest_path.replace_extension(".json");
  std::ifstream js(manifest_path);
  if (!js) throw data::IoError("cannot read checkpoint manifest " + manifest_path.string());
  nlohmann::json manifest;
  try {
    js >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw data::IoError("malformed checkpoint manifest " + manifest_path.string() + ": " + e.what());
  }
  if (manifest.value("format", std::string{}) != kFormat) {
    throw data::IoError(manifest_path.string() + " is not a cyclevib checkpoint");
  }

  const auto blob_path = manifest_path.parent_path() / manifest.at("blob").get<std::string>();
  std::ifstream bin(blob_path, std::ios::binary);
  if (!bin) throw data::IoError("cannot read checkpoint blob " + blob_path.string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  if (blob.size() != manifest.at("blob_bytes").get<std::size_t>() ||
      manifest.at("hash").get<std::string>() != "fnv1a64:" + hex64(fnv1a64(blob))) {
    throw data::IoError("checkpoint blob " + blob_path.string() + " does not match its manifest hash");
  }

  // Build a freshly initialised model of the right structure, then overwrite values.
  CycleVibModel model(config_from_json(manifest.at("config")));
  auto params = model.parameters();
  const auto& listed = manifest.at("parameters");
  if (listed.size() != params.size()) throw data::IoError("checkpoint parameter count mismatch");
  std::size_t offset = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (listed[k].at("name").get<std::string>() != params[k]->name ||
        listed[k].at("shape").get<nd::Shape>() != params[k]->value.shape()) {
      throw data::IoError("checkpoint parameter '" + listed[k].at("name").get<std::string>() +
                          "' does not match the model layout");
    }
    read_into(blob, offset, params[k]->value);
  }

  std::optional<nd::OptimizerState> optimizer;
  if (const auto& o = manifest.at("optimizer"); !o.is_null()) {
    nd::AdamOptions options{o.at("learning_rate").get<double>(), o.at("beta1").get<double>(),
                            o.at("beta2").get<double>(), o.at("epsilon").get<double>()};
    nd::OptimizerState state = nd::make_optimizer_state(params, options);
    state.step_count = o.at("step_count").get<std::int64_t>();
    for (auto& m : state.first_moment) read_into(blob, offset, m);
    for (auto& v : state.second_moment) read_into(blob, offset, v);
    optimizer = std::move(state);
  }
  if (offset != blob.size()) throw data::IoError("checkpoint blob has trailing bytes");

  CheckpointInfo info{manifest.at("step").get<std::int64_t>(), manifest.at("epoch").get<std::int64_t>(),
                      manifest.value("metrics", nlohmann::json::object())};
  return Checkpoint{std::move(model), std::move(optimizer), std::move(info)};
}

}  // namespace cyclevib::model
