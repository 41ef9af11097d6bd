#include "cyclevib/cli/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace cyclevib::cli {

using data::ConfigError;

std::filesystem::path Paths::dataset_stem() const { return dataset.empty() ? root / "data" / "dataset" : dataset; }
std::filesystem::path Paths::checkpoint_stem() const {
  return checkpoint.empty() ? root / "checkpoints" / "model" : checkpoint;
}
std::filesystem::path Paths::report_dir() const { return reports.empty() ? root / "reports" : reports; }

void RunConfig::resolve() {
  model.lambda = weights.lambda;
  model.beta = weights.beta;
  data.validate();
  model.validate();
  train.validate();
  weights.validate();
  if (invariance.n_samples == 0 || invariance.n_references == 0) {
    throw ConfigError("InvarianceOptions needs positive n_references and n_samples");
  }
  if (traversal.steps == 0) throw ConfigError("TraversalSpec.steps must be positive");
}

RunConfig default_run_config(int dim) {
  RunConfig c;
  c.data = dim == 3 ? data::LevelSetSpec::ellipsoid() : data::LevelSetSpec::ellipse();
  c.weights.lambda = 10.0;
  c.weights.beta = 0.1;
  c.train.epochs = 300;
  c.train.lr_final_fraction = 0.1;
  if (dim == 3) c.paths.root = "runs/ellipsoid";
  c.model.lambda = c.weights.lambda;
  c.model.beta = c.weights.beta;
  return c;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError(key + ": cannot parse '" + raw + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + raw + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& raw) {
  std::vector<T> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_number<T>(key, item));
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
std::string format_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string& name, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define CV_NUM(SEC, KEY, MEMBER, TYPE)                                                                 \
  Field {                                                                                              \
    SEC, KEY, [](RunConfig& c, const std::string& n, const std::string& v) { c.MEMBER = parse_number<TYPE>(n, v); }, \
        [](const RunConfig& c) {                                                                       \
          if constexpr (std::is_floating_point_v<TYPE>) return format_double(c.MEMBER);                \
          else return std::to_string(c.MEMBER);                                                        \
        }                                                                                              \
  }
#define CV_LIST(SEC, KEY, MEMBER, TYPE)                                                                \
  Field {                                                                                              \
    SEC, KEY, [](RunConfig& c, const std::string& n, const std::string& v) { c.MEMBER = parse_list<TYPE>(n, v); }, \
        [](const RunConfig& c) { return format_list(c.MEMBER); }                                       \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      CV_NUM("LevelSetSpec", "dim", data.dim, int),
      CV_LIST("LevelSetSpec", "semi_axes", data.semi_axes, double),
      CV_NUM("LevelSetSpec", "rotation_deg", data.rotation_deg, double),
      CV_NUM("LevelSetSpec", "property_noise_std", data.property_noise_std, double),
      CV_NUM("LevelSetSpec", "n_points", data.n_points, std::size_t),
      CV_NUM("LevelSetSpec", "seed", data.seed, std::uint64_t),
      CV_NUM("LevelSetSpec", "train_fraction", data.train_fraction, double),

      CV_NUM("ModelConfig", "d_in", model.d_in, std::size_t),
      CV_NUM("ModelConfig", "d_y", model.d_y, std::size_t),
      CV_NUM("ModelConfig", "d_z0", model.d_z0, std::size_t),
      CV_NUM("ModelConfig", "d_z1", model.d_z1, std::size_t),
      CV_LIST("ModelConfig", "encoder_widths", model.encoder_widths, std::size_t),
      CV_LIST("ModelConfig", "decx_widths", model.decx_widths, std::size_t),
      CV_LIST("ModelConfig", "decy_widths", model.decy_widths, std::size_t),
      Field{"ModelConfig", "noise_mode",
            [](RunConfig& c, const std::string& n, const std::string& v) {
              try {
                c.model.noise_mode = model::noise_mode_from_string(trim(v));
              } catch (const std::exception& e) {
                throw ConfigError(n + ": " + e.what());
              }
            },
            [](const RunConfig& c) { return model::to_string(c.model.noise_mode); }},
      Field{"ModelConfig", "hidden_activation",
            [](RunConfig& c, const std::string& n, const std::string& v) {
              try {
                c.model.hidden_activation = nd::activation_from_string(trim(v));
              } catch (const std::exception& e) {
                throw ConfigError(n + ": " + e.what());
              }
            },
            [](const RunConfig& c) { return nd::to_string(c.model.hidden_activation); }},
      CV_NUM("ModelConfig", "seed", model.seed, std::uint64_t),

      CV_NUM("TrainConfig", "epochs", train.epochs, std::size_t),
      CV_NUM("TrainConfig", "batch_size", train.batch_size, std::size_t),
      CV_NUM("TrainConfig", "lr", train.lr, double),
      CV_NUM("TrainConfig", "lr_final_fraction", train.lr_final_fraction, double),
      CV_NUM("TrainConfig", "n_uniform_samples", train.n_uniform_samples, std::size_t),
      CV_NUM("TrainConfig", "n_fixed_z0_samples", train.n_fixed_z0_samples, std::size_t),
      CV_NUM("TrainConfig", "cycle_start_epoch", train.cycle_start_epoch, std::size_t),
      CV_NUM("TrainConfig", "cycle_ramp_epochs", train.cycle_ramp_epochs, std::size_t),
      Field{"TrainConfig", "compression",
            [](RunConfig& c, const std::string& n, const std::string& v) {
              try {
                c.train.compression = trainer::compression_from_string(trim(v));
              } catch (const std::exception& e) {
                throw ConfigError(n + ": " + e.what());
              }
            },
            [](const RunConfig& c) { return trainer::to_string(c.train.compression); }},
      CV_NUM("TrainConfig", "log_every", train.log_every, std::size_t),
      CV_NUM("TrainConfig", "checkpoint_every", train.checkpoint_every, std::size_t),
      CV_NUM("TrainConfig", "seed", train.seed, std::uint64_t),

      CV_NUM("LossWeights", "lambda", weights.lambda, double),
      CV_NUM("LossWeights", "beta", weights.beta, double),

      CV_NUM("InvarianceOptions", "n_references", invariance.n_references, std::size_t),
      CV_NUM("InvarianceOptions", "n_samples", invariance.n_samples, std::size_t),
      CV_NUM("InvarianceOptions", "seed", invariance.seed, std::uint64_t),

      Field{"TraversalSpec", "z0_dim",
            [](RunConfig& c, const std::string& n, const std::string& v) {
              const std::string s = trim(v);
              if (s.empty() || s == "auto") {
                c.traversal.z0_dim.reset();
              } else {
                c.traversal.z0_dim = parse_number<std::size_t>(n, s);
              }
            },
            [](const RunConfig& c) {
              return c.traversal.z0_dim ? std::to_string(*c.traversal.z0_dim) : std::string("auto");
            }},
      CV_LIST("TraversalSpec", "z0_values", traversal.z0_values, double),
      CV_NUM("TraversalSpec", "n_z0_values", traversal.n_z0_values, std::size_t),
      CV_LIST("TraversalSpec", "z1_dims", traversal.z1_dims, std::size_t),
      CV_NUM("TraversalSpec", "steps", traversal.steps, std::size_t),
      CV_NUM("TraversalSpec", "range_std", traversal.range_std, double),
      Field{"TraversalSpec", "extended",
            [](RunConfig& c, const std::string& n, const std::string& v) { c.traversal.extended = parse_bool(n, v); },
            [](const RunConfig& c) { return std::string(c.traversal.extended ? "true" : "false"); }},

      Field{"Paths", "root", [](RunConfig& c, const std::string&, const std::string& v) { c.paths.root = trim(v); },
            [](const RunConfig& c) { return c.paths.root.string(); }},
      Field{"Paths", "dataset",
            [](RunConfig& c, const std::string&, const std::string& v) { c.paths.dataset = trim(v); },
            [](const RunConfig& c) { return c.paths.dataset.string(); }},
      Field{"Paths", "checkpoint",
            [](RunConfig& c, const std::string&, const std::string& v) { c.paths.checkpoint = trim(v); },
            [](const RunConfig& c) { return c.paths.checkpoint.string(); }},
      Field{"Paths", "reports",
            [](RunConfig& c, const std::string&, const std::string& v) { c.paths.reports = trim(v); },
            [](const RunConfig& c) { return c.paths.reports.string(); }},
  };
  return table;
}

#undef CV_NUM
#undef CV_LIST

}  // namespace

void set_field(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.section + "." + f.key == key) {
      f.set(config, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_assignment(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("expected Section.key=value, got '" + assignment + "'");
  set_field(config, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void load_ini(RunConfig& config, const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("cannot read config " + path.string() + ": " + e.message() + " (line " +
                      std::to_string(e.line()) + ")");
  }
  for (const auto& [section, entries] : tree) {
    if (entries.empty()) throw ConfigError("config " + path.string() + ": key '" + section + "' outside a section");
    for (const auto& [key, value] : entries) set_field(config, section + "." + key, value.data());
  }
}

std::string to_ini(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

void write_ini(const RunConfig& config, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw data::IoError("cannot write " + path.string());
  out << to_ini(config);
  if (!out) throw data::IoError("failed writing " + path.string());
}

std::vector<std::string> field_names() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.section + "." + f.key);
  return out;
}

}  // namespace cyclevib::cli
