#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cyclevib::nd {

/// Shape or extent mismatch between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or Inf appeared where all values must be finite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke an operation precondition (e.g. non-scalar loss).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operation invoked in the wrong lifecycle state (e.g. reused tape).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major float64 array. Rank 0 is a scalar, rank 1 a vector
/// (treated as a single row by the 2-D kernels), rank 2 a matrix.
class Tensor {
 public:
  Tensor() : shape_{}, data_(1, 0.0) {}
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor full(Shape shape, double value);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);
  static Tensor from_rows(const std::vector<std::vector<double>>& rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : 1; }
  std::size_t cols() const { return shape_.empty() ? 1 : shape_.back(); }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  /// Scalar value of a one-element tensor.
  double item() const;
  std::vector<double> row(std::size_t r) const;

  bool all_finite() const;
  /// Throws NumericError mentioning `what` if any entry is NaN or Inf.
  void require_finite(const std::string& what) const;

  Tensor reshaped(Shape shape) const;
  Tensor rows_slice(std::size_t begin, std::size_t end) const;
  Tensor cols_slice(std::size_t begin, std::size_t end) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Horizontal (column-wise) concatenation of 2-D tensors with equal row counts.
Tensor hconcat(const std::vector<Tensor>& parts);
/// Vertical (row-wise) concatenation of 2-D tensors with equal column counts.
Tensor vconcat(const std::vector<Tensor>& parts);
/// Gathers the given rows into a new matrix.
Tensor take_rows(const Tensor& m, std::span<const std::size_t> indices);

}  // namespace cyclevib::nd
