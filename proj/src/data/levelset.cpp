#include "cyclevib/data/levelset.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <numeric>
#include <sstream>

#include "cyclevib/ndmath/rng.hpp"

namespace cyclevib::data {

namespace {

constexpr double kBiasScale = 0.1;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json tensor_to_json(const nd::Tensor& t) {
  return nlohmann::json{{"shape", t.shape()}, {"data", t.values()}};
}

nd::Tensor tensor_from_json(const nlohmann::json& j) {
  return nd::Tensor(j.at("shape").get<nd::Shape>(), j.at("data").get<std::vector<double>>());
}

nlohmann::json spec_to_json(const LevelSetSpec& s) {
  return nlohmann::json{{"dim", s.dim},
                        {"semi_axes", s.semi_axes},
                        {"rotation_deg", s.rotation_deg},
                        {"property_noise_std", s.property_noise_std},
                        {"n_points", s.n_points},
                        {"seed", s.seed},
                        {"train_fraction", s.train_fraction}};
}

LevelSetSpec spec_from_json(const nlohmann::json& j) {
  LevelSetSpec s;
  s.dim = j.at("dim").get<int>();
  s.semi_axes = j.at("semi_axes").get<std::vector<double>>();
  s.rotation_deg = j.at("rotation_deg").get<double>();
  s.property_noise_std = j.at("property_noise_std").get<double>();
  s.n_points = j.at("n_points").get<std::size_t>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.train_fraction = j.value("train_fraction", 0.9);
  return s;
}

}  // namespace

void LevelSetSpec::validate() const {
  if (dim != 2 && dim != 3) throw ConfigError("level-set dim must be 2 or 3, got " + std::to_string(dim));
  if (semi_axes.size() < static_cast<std::size_t>(dim)) {
    throw ConfigError("need " + std::to_string(dim) + " semi-axes, got " + std::to_string(semi_axes.size()));
  }
  for (int i = 0; i < dim; ++i) {
    if (!(semi_axes[static_cast<std::size_t>(i)] > 0.0)) throw ConfigError("semi-axes must be strictly positive");
  }
  if (!(property_noise_std >= 0.0)) throw ConfigError("property_noise_std must be >= 0");
  if (n_points < 10) throw ConfigError("n_points must be at least 10, got " + std::to_string(n_points));
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
}

double property_value(std::span<const double> point, const LevelSetSpec& spec) {
  if (point.size() != static_cast<std::size_t>(spec.dim)) {
    throw nd::DimensionError("property_value: point has " + std::to_string(point.size()) + " coordinates, spec dim " +
                             std::to_string(spec.dim));
  }
  const double theta = spec.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double r1 = c * point[0] + s * point[1];
  const double r2 = -s * point[0] + c * point[1];
  const auto& a = spec.semi_axes;
  double value = r1 * r1 / (a[0] * a[0]) + r2 * r2 / (a[1] * a[1]);
  if (spec.dim == 3) value += point[2] * point[2] / (a[2] * a[2]);
  return value;
}

LiftMaps make_lift_maps(int original_dim, std::uint64_t seed) {
  nd::Rng rng(seed, nd::Stream::kLift);
  const auto d = static_cast<Eigen::Index>(original_dim);
  const auto lx = static_cast<Eigen::Index>(kLiftedXDim);
  const auto ly = static_cast<Eigen::Index>(kLiftedYDim);

  auto orthonormal = [&rng](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd g(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) g(r, c) = rng.normal();
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
    nd::Tensor t({static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)});
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) t(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = q(r, c);
    }
    return t;
  };

  LiftMaps lift;
  lift.seed = seed;
  lift.x_matrix = orthonormal(lx, d);
  lift.x_bias = nd::Tensor({kLiftedXDim});
  for (double& v : lift.x_bias.data()) v = kBiasScale * rng.normal();
  lift.y_matrix = orthonormal(ly, 1);
  lift.y_bias = nd::Tensor({kLiftedYDim});
  for (double& v : lift.y_bias.data()) v = kBiasScale * rng.normal();
  return lift;
}

namespace {

// rows -> rows * M^T + b
nd::Tensor affine(const nd::Tensor& in, const nd::Tensor& m, const nd::Tensor& b) {
  if (in.cols() != m.cols()) {
    throw nd::DimensionError("lift: input has " + std::to_string(in.cols()) + " columns, map expects " +
                             std::to_string(m.cols()));
  }
  const std::size_t n = in.rows();
  nd::Tensor out({n, m.rows()});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double s = b[i];
      for (std::size_t j = 0; j < m.cols(); ++j) s += m(i, j) * in(r, j);
      out(r, i) = s;
    }
  }
  return out;
}

// rows -> (rows - b) * M, the pseudo-inverse for orthonormal columns
nd::Tensor inverse_affine(const nd::Tensor& in, const nd::Tensor& m, const nd::Tensor& b) {
  if (in.cols() != m.rows()) {
    throw nd::DimensionError("unlift: input has " + std::to_string(in.cols()) + " columns, map has " +
                             std::to_string(m.rows()) + " rows");
  }
  const std::size_t n = in.rows();
  nd::Tensor out({n, m.cols()});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < m.rows(); ++i) s += m(i, j) * (in(r, i) - b[i]);
      out(r, j) = s;
    }
  }
  return out;
}

}  // namespace

nd::Tensor lift_x(const nd::Tensor& original, const LiftMaps& lift) {
  return affine(original, lift.x_matrix, lift.x_bias);
}
nd::Tensor lift_y(const nd::Tensor& original, const LiftMaps& lift) {
  return affine(original, lift.y_matrix, lift.y_bias);
}
nd::Tensor unlift(const nd::Tensor& points, const LiftMaps& lift) {
  return inverse_affine(points, lift.x_matrix, lift.x_bias);
}
nd::Tensor unlift_y(const nd::Tensor& points, const LiftMaps& lift) {
  return inverse_affine(points, lift.y_matrix, lift.y_bias);
}

Dataset generate(const LevelSetSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_points;
  const auto d = static_cast<std::size_t>(spec.dim);
  nd::Rng rng(spec.seed, nd::Stream::kData);

  Dataset ds;
  ds.spec = spec;
  ds.X_original = rng.uniform({n, d}, -1.0, 1.0);
  ds.Y_original = nd::Tensor({n, 1});
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = ds.X_original.data().data() + r * d;
    double y = property_value(std::span<const double>(row, d), spec);
    if (spec.property_noise_std > 0.0) y += spec.property_noise_std * rng.normal();
    ds.Y_original(r, 0) = y;
  }
  ds.lift = make_lift_maps(spec.dim, spec.seed);
  ds.X = lift_x(ds.X_original, ds.lift);
  ds.Y = lift_y(ds.Y_original, ds.lift);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  nd::Rng shuffle(spec.seed, nd::Stream::kShuffle);
  std::shuffle(order.begin(), order.end(), shuffle.engine());
  const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
  ds.train_index.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  ds.test_index.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& stem) {
  const auto csv_path = std::filesystem::path(stem).replace_extension(".csv");
  const auto json_path = std::filesystem::path(stem).replace_extension(".json");
  if (csv_path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(csv_path.parent_path(), ec);
  }
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write " + csv_path.string());

  const std::size_t d = ds.X_original.cols();
  std::vector<std::string> header;
  for (std::size_t i = 0; i < kLiftedXDim; ++i) header.push_back("x" + std::to_string(i));
  for (std::size_t i = 0; i < kLiftedYDim; ++i) header.push_back("y" + std::to_string(i));
  for (std::size_t i = 0; i < d; ++i) header.push_back("xo" + std::to_string(i));
  header.push_back("yo0");
  for (std::size_t i = 0; i < header.size(); ++i) csv << (i ? "," : "") << header[i];
  csv << '\n';
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t i = 0; i < kLiftedXDim; ++i) csv << format_double(ds.X(r, i)) << ',';
    for (std::size_t i = 0; i < kLiftedYDim; ++i) csv << format_double(ds.Y(r, i)) << ',';
    for (std::size_t i = 0; i < d; ++i) csv << format_double(ds.X_original(r, i)) << ',';
    csv << format_double(ds.Y_original(r, 0)) << '\n';
  }
  if (!csv) throw IoError("failed writing " + csv_path.string());

  nlohmann::json side{{"spec", spec_to_json(ds.spec)},
                      {"seed", ds.spec.seed},
                      {"n_rows", ds.size()},
                      {"columns", header},
                      {"lift",
                       {{"seed", ds.lift.seed},
                        {"x_matrix", tensor_to_json(ds.lift.x_matrix)},
                        {"x_bias", tensor_to_json(ds.lift.x_bias)},
                        {"y_matrix", tensor_to_json(ds.lift.y_matrix)},
                        {"y_bias", tensor_to_json(ds.lift.y_bias)}}},
                      {"split", {{"train", ds.train_index}, {"test", ds.test_index}}}};
  std::ofstream js(json_path);
  if (!js) throw IoError("cannot write " + json_path.string());
  js << side.dump(2) << '\n';
  if (!js) throw IoError("failed writing " + json_path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::filesystem::path stem = path;
  if (stem.extension() == ".csv" || stem.extension() == ".json") stem.replace_extension();
  const auto csv_path = std::filesystem::path(stem).replace_extension(".csv");
  const auto json_path = std::filesystem::path(stem).replace_extension(".json");

  std::ifstream js(json_path);
  if (!js) throw IoError("cannot read " + json_path.string());
  nlohmann::json side;
  try {
    js >> side;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed dataset sidecar " + json_path.string() + ": " + e.what());
  }

  Dataset ds;
  try {
    ds.spec = spec_from_json(side.at("spec"));
    const auto& lj = side.at("lift");
    ds.lift.seed = lj.at("seed").get<std::uint64_t>();
    ds.lift.x_matrix = tensor_from_json(lj.at("x_matrix"));
    ds.lift.x_bias = tensor_from_json(lj.at("x_bias"));
    ds.lift.y_matrix = tensor_from_json(lj.at("y_matrix"));
    ds.lift.y_bias = tensor_from_json(lj.at("y_bias"));
    ds.train_index = side.at("split").at("train").get<std::vector<std::size_t>>();
    ds.test_index = side.at("split").at("test").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("incomplete dataset sidecar " + json_path.string() + ": " + e.what());
  }

  std::ifstream csv(csv_path);
  if (!csv) throw IoError("cannot read " + csv_path.string());
  std::string line;
  std::getline(csv, line);
  const std::size_t d = static_cast<std::size_t>(ds.spec.dim);
  const std::size_t width = kLiftedXDim + kLiftedYDim + d + 1;
  std::vector<double> x, y, xo, yo;
  std::size_t line_no = 1;
  while (std::getline(csv, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      vals.push_back(std::strtod(cell.c_str(), &end));
      if (end == cell.c_str()) throw IoError(csv_path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
    if (vals.size() != width) {
      throw IoError(csv_path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                    " columns");
    }
    x.insert(x.end(), vals.begin(), vals.begin() + kLiftedXDim);
    y.insert(y.end(), vals.begin() + kLiftedXDim, vals.begin() + kLiftedXDim + kLiftedYDim);
    xo.insert(xo.end(), vals.begin() + kLiftedXDim + kLiftedYDim, vals.end() - 1);
    yo.push_back(vals.back());
  }
  const std::size_t n = yo.size();
  ds.X = nd::Tensor({n, kLiftedXDim}, std::move(x));
  ds.Y = nd::Tensor({n, kLiftedYDim}, std::move(y));
  ds.X_original = nd::Tensor({n, d}, std::move(xo));
  ds.Y_original = nd::Tensor({n, 1}, std::move(yo));
  for (auto i : ds.train_index) {
    if (i >= n) throw IoError("split index out of range in " + json_path.string());
  }
  for (auto i : ds.test_index) {
    if (i >= n) throw IoError("split index out of range in " + json_path.string());
  }
  return ds;
}

}  // namespace cyclevib::data
