#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cyclevib/ndmath/tensor.hpp"

namespace cyclevib::data {

/// Invalid dataset or generator configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kLiftedXDim = 5;
inline constexpr std::size_t kLiftedYDim = 3;

/// Quadratic level-set family: ellipse (dim 2) or ellipsoid (dim 3), rotated in the x1-x2 plane.
struct LevelSetSpec {
  int dim = 2;
  std::vector<double> semi_axes = {1.0, 0.5, 0.75};
  double rotation_deg = 45.0;
  double property_noise_std = 0.01;
  std::size_t n_points = 10000;
  std::uint64_t seed = 1;
  double train_fraction = 0.9;

  /// Throws ConfigError on an invalid spec.
  void validate() const;
  static LevelSetSpec ellipse() { return LevelSetSpec{}; }
  static LevelSetSpec ellipsoid() {
    LevelSetSpec s;
    s.dim = 3;
    return s;
  }
};

/// Affine embeddings with orthonormal columns: x -> Mx x + bx (d -> 5), y -> my y + by (1 -> 3).
struct LiftMaps {
  nd::Tensor x_matrix;  // 5 x d
  nd::Tensor x_bias;    // 5
  nd::Tensor y_matrix;  // 3 x 1
  nd::Tensor y_bias;    // 3
  std::uint64_t seed = 0;

  std::size_t original_dim() const { return x_matrix.cols(); }
};

struct Dataset {
  nd::Tensor X;           // n x 5
  nd::Tensor Y;           // n x 3
  nd::Tensor X_original;  // n x d
  nd::Tensor Y_original;  // n x 1
  LiftMaps lift;
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> test_index;
  LevelSetSpec spec;

  std::size_t size() const { return X.rows(); }
  nd::Tensor train_X() const { return nd::take_rows(X, train_index); }
  nd::Tensor train_Y() const { return nd::take_rows(Y, train_index); }
  nd::Tensor test_X() const { return nd::take_rows(X, test_index); }
  nd::Tensor test_Y() const { return nd::take_rows(Y, test_index); }
};

/// Noiseless property sum_i r_i^2 / a_i^2 of `point` after rotation in the x1-x2 plane.
double property_value(std::span<const double> point, const LevelSetSpec& spec);

/// Seeded random lift maps (QR of a Gaussian matrix, small fixed-scale bias).
LiftMaps make_lift_maps(int original_dim, std::uint64_t seed);

nd::Tensor lift_x(const nd::Tensor& original, const LiftMaps& lift);
nd::Tensor lift_y(const nd::Tensor& original, const LiftMaps& lift);
/// Least-squares inverse of the x lift (rows of 5 -> rows of d).
nd::Tensor unlift(const nd::Tensor& points, const LiftMaps& lift);
/// Least-squares inverse of the y lift (rows of 3 -> rows of 1).
nd::Tensor unlift_y(const nd::Tensor& points, const LiftMaps& lift);

Dataset generate(const LevelSetSpec& spec);

/// Writes `<stem>.csv` and `<stem>.json`.
void save_dataset(const Dataset& ds, const std::filesystem::path& stem);
/// Reads a dataset written by save_dataset; `path` may name the stem, the .csv or the .json.
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace cyclevib::data
