#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cyclevib/data/levelset.hpp"
#include "cyclevib/eval/evalsuite.hpp"
#include "cyclevib/model/model.hpp"
#include "cyclevib/objectives/objectives.hpp"
#include "cyclevib/trainer/trainer.hpp"

namespace cyclevib::cli {

/// Output locations. Empty dataset/checkpoint stems resolve under `root`.
struct Paths {
  std::filesystem::path root = "runs/default";
  std::filesystem::path dataset;
  std::filesystem::path checkpoint;
  std::filesystem::path reports;

  std::filesystem::path dataset_stem() const;
  std::filesystem::path checkpoint_stem() const;
  std::filesystem::path report_dir() const;
};

struct RunConfig {
  data::LevelSetSpec data;
  model::ModelConfig model;
  trainer::TrainConfig train;
  objectives::LossWeights weights;
  eval::InvarianceOptions invariance;
  eval::TraversalSpec traversal;
  Paths paths;

  /// Copies the weights into the model config and validates every section.
  void resolve();
};

/// Experiment defaults for the ellipse (dim 2) or ellipsoid (dim 3) task.
RunConfig default_run_config(int dim = 2);

/// Sets one field from its `Section.key` name. Throws data::ConfigError on
/// unknown keys or unparsable values.
void set_field(RunConfig& config, const std::string& key, const std::string& value);
/// Parses a `Section.key=value` assignment.
void apply_assignment(RunConfig& config, const std::string& assignment);

/// Overlays an INI file on `config`.
void load_ini(RunConfig& config, const std::filesystem::path& path);
std::string to_ini(const RunConfig& config);
void write_ini(const RunConfig& config, const std::filesystem::path& path);

/// Every `Section.key` name in file order.
std::vector<std::string> field_names();

}  // namespace cyclevib::cli
