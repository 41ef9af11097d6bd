#include "cyclevib/ndmath/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace cyclevib::nd {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ')';
  return out.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + shape_string(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Tensor({0, 0});
  const std::size_t cols = rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw DimensionError("ragged rows in Tensor::from_rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), cols}, std::move(data));
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw DimensionError("item() on tensor of shape " + shape_string(shape_));
  }
  return data_[0];
}

std::vector<double> Tensor::row(std::size_t r) const {
  const std::size_t c = cols();
  return {data_.begin() + static_cast<std::ptrdiff_t>(r * c),
          data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * c)};
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::require_finite(const std::string& what) const {
  if (!all_finite()) throw NumericError("non-finite value in " + what);
}

Tensor Tensor::reshaped(Shape shape) const { return Tensor(std::move(shape), data_); }

Tensor Tensor::rows_slice(std::size_t begin, std::size_t end) const {
  if (rank() != 2 || begin > end || end > shape_[0]) {
    throw DimensionError("row slice [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of range for " + shape_string(shape_));
  }
  const std::size_t c = shape_[1];
  return Tensor({end - begin, c},
                std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * c),
                                    data_.begin() + static_cast<std::ptrdiff_t>(end * c)));
}

Tensor Tensor::cols_slice(std::size_t begin, std::size_t end) const {
  if (rank() != 2 || begin > end || end > shape_[1]) {
    throw DimensionError("column slice [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") out of range for " + shape_string(shape_));
  }
  const std::size_t n = shape_[0];
  const std::size_t c = shape_[1];
  const std::size_t w = end - begin;
  std::vector<double> out(n * w);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = data_[r * c + begin + j];
  }
  return Tensor({n, w}, std::move(out));
}

Tensor hconcat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("hconcat of zero tensors");
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.rows() != n) throw DimensionError("hconcat row count mismatch");
    total += p.cols();
  }
  Tensor out({n, total});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.cols();
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < w; ++j) out(r, offset + j) = p(r, j);
    }
    offset += w;
  }
  return out;
}

Tensor vconcat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("vconcat of zero tensors");
  const std::size_t c = parts.front().cols();
  std::size_t total = 0;
  std::vector<double> data;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.cols() != c) throw DimensionError("vconcat column count mismatch");
    total += p.rows();
    data.insert(data.end(), p.data().begin(), p.data().end());
  }
  return Tensor({total, c}, std::move(data));
}

Tensor take_rows(const Tensor& m, std::span<const std::size_t> indices) {
  const std::size_t c = m.cols();
  Tensor out({indices.size(), c});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= m.rows()) throw DimensionError("take_rows index out of range");
    for (std::size_t j = 0; j < c; ++j) out(i, j) = m(indices[i], j);
  }
  return out;
}

}  // namespace cyclevib::nd
