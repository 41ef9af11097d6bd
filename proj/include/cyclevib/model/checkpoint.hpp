#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "cyclevib/model/model.hpp"
#include "cyclevib/ndmath/adam.hpp"

namespace cyclevib::model {

nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

struct CheckpointInfo {
  std::int64_t step = 0;
  std::int64_t epoch = 0;
  nlohmann::json metrics = nlohmann::json::object();
};

struct Checkpoint {
  CycleVibModel model;
  std::optional<nd::OptimizerState> optimizer;
  CheckpointInfo info;
};

/// FNV-1a 64-bit hash, used as the blob content hash.
std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

/// Writes `<stem>.json` (manifest) and `<stem>.bin` (little-endian float64
/// parameters in declaration order, then optimizer moments if given).
void save_checkpoint(const std::filesystem::path& stem, const CycleVibModel& model,
                     const nd::OptimizerState* optimizer, const CheckpointInfo& info);

/// `path` may name the stem or the manifest. Verifies the content hash.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cyclevib::model
