#include "cyclevib/ndmath/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

namespace cyclevib::nd {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

ConstMatMap as_matrix(const Tensor& t) {
  return ConstMatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MatMap as_matrix(Tensor& t) {
  return MatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

void same_tape(const Var& a, const Var& b, const char* op) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw ContractError(std::string(op) + ": operands live on different tapes");
  }
}

enum class Broadcast { kSame, kRow, kScalar };

Broadcast classify(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  auto row_like = [](const Tensor& t) { return t.rank() == 1 || (t.rank() == 2 && t.rows() == 1); };
  if (row_like(a) && row_like(b) && a.cols() == b.cols()) return Broadcast::kSame;
  if (b.size() == 1) return Broadcast::kScalar;
  const bool b_is_row = b.rank() == 1 || (b.rank() == 2 && b.rows() == 1);
  if (a.rank() == 2 && b_is_row && b.cols() == a.cols()) return Broadcast::kRow;
  throw DimensionError(std::string(op) + ": cannot combine shapes " + shape_string(a.shape()) + " and " +
                       shape_string(b.shape()));
}

/// Index into b for flat index i of a under the given broadcast.
inline std::size_t bidx(Broadcast mode, std::size_t i, std::size_t cols) {
  switch (mode) {
    case Broadcast::kSame: return i;
    case Broadcast::kRow: return i % cols;
    case Broadcast::kScalar: return 0;
  }
  return 0;
}

template <typename F, typename DF>
Var unary(const char* op, const Var& a, F f, DF df) {
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return a.tape().record(op, std::move(y), {ia}, [ia, df](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * df(x[i], y[i]);
  });
}

}  // namespace

namespace {

// out = a * b computed one output row at a time with a fixed accumulation
// order, so each row's result does not depend on its position in the batch.
void rowwise_product(const Tensor& a, const Tensor& b, Tensor& out) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  const double* bp = b.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.data().data() + i * m;
    const double* ar = a.data().data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = ar[p];
      const double* br = bp + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += s * br[j];
    }
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b, bool transpose_b) {
  same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2) throw DimensionError("matmul needs rank-2 operands");
  const std::size_t inner_b = transpose_b ? bv.cols() : bv.rows();
  if (av.cols() != inner_b) {
    throw DimensionError("matmul: " + shape_string(av.shape()) + (transpose_b ? " * T" : " * ") +
                         shape_string(bv.shape()) + " inner extents differ");
  }
  const std::size_t out_cols = transpose_b ? bv.rows() : bv.cols();
  Tensor out({av.rows(), out_cols});
  if (transpose_b) {
    Tensor bt({bv.cols(), bv.rows()});
    as_matrix(bt) = as_matrix(bv).transpose();
    rowwise_product(av, bt, out);
  } else {
    rowwise_product(av, bv, out);
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.tape().record("matmul", std::move(out), {ia, ib}, [ia, ib, transpose_b](Tape& t, std::size_t self) {
    const auto g = as_matrix(t.grad(self));
    const auto am = as_matrix(t.value(ia));
    const auto bm = as_matrix(t.value(ib));
    if (t.requires_grad(ia)) {
      auto ga = as_matrix(t.grad_buffer(ia));
      if (transpose_b) {
        ga.noalias() += g * bm;
      } else {
        ga.noalias() += g * bm.transpose();
      }
    }
    if (t.requires_grad(ib)) {
      auto gb = as_matrix(t.grad_buffer(ib));
      if (transpose_b) {
        gb.noalias() += g.transpose() * am;
      } else {
        gb.noalias() += am.transpose() * g;
      }
    }
  });
}

namespace {

template <typename F, typename DA, typename DB>
Var binary(const char* op, const Var& a, const Var& b, F f, DA da, DB db) {
  same_tape(a, b, op);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast mode = classify(av, bv, op);
  const std::size_t cols = av.cols();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i], bv[bidx(mode, i, cols)]);
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.tape().record(op, std::move(out), {ia, ib}, [=](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(ib);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(x[i], y[bidx(mode, i, cols)]);
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const std::size_t j = bidx(mode, i, cols);
        gb[j] += g[i] * db(x[i], y[j]);
      }
    }
  });
}

}  // namespace

Var add(const Var& a, const Var& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Var sub(const Var& a, const Var& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Var mul(const Var& a, const Var& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Var add_scalar(const Var& a, double c) {
  return unary(
      "add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var scale(const Var& a, double c) {
  return unary(
      "scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Var tanh(const Var& a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var softplus(const Var& a) {
  return unary(
      "softplus", a,
      [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var exp(const Var& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(const Var& a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sqrt(const Var& a) {
  return unary(
      "sqrt", a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Var abs(const Var& a) {
  return unary(
      "abs", a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return a.tape().record("sum", Tensor::scalar(s), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (double& v : t.grad_buffer(ia).data()) v += g;
  });
}

Var mean(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var sum(const Var& a, Axis axis) {
  const Tensor& x = a.value();
  const std::size_t n = x.rows();
  const std::size_t m = x.cols();
  Tensor out(axis == Axis::kRows ? Shape{m} : Shape{n});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) out[axis == Axis::kRows ? c : r] += x(r, c);
  }
  const std::size_t ia = a.id();
  return a.tape().record(axis == Axis::kRows ? "sum_rows" : "sum_cols", std::move(out), {ia},
                         [ia, axis, n, m](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           Tensor& ga = t.grad_buffer(ia);
                           for (std::size_t r = 0; r < n; ++r) {
                             for (std::size_t c = 0; c < m; ++c) ga[r * m + c] += g[axis == Axis::kRows ? c : r];
                           }
                         });
}

Var mean(const Var& a, Axis axis) {
  const std::size_t count = axis == Axis::kRows ? a.value().rows() : a.value().cols();
  if (count == 0) throw ContractError("mean over an empty axis");
  return scale(sum(a, axis), 1.0 / static_cast<double>(count));
}

Var concat(const std::vector<Var>& parts, Axis axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  std::vector<Tensor> values;
  std::vector<std::size_t> ids;
  values.reserve(parts.size());
  for (const auto& p : parts) {
    same_tape(parts.front(), p, "concat");
    values.push_back(p.value());
    ids.push_back(p.id());
  }
  Tensor out = axis == Axis::kCols ? hconcat(values) : vconcat(values);
  return parts.front().tape().record(axis == Axis::kCols ? "hconcat" : "vconcat", std::move(out), ids,
                                     [ids, axis](Tape& t, std::size_t self) {
                                       const Tensor& g = t.grad(self);
                                       const std::size_t total_cols = g.cols();
                                       std::size_t offset = 0;
                                       for (auto id : ids) {
                                         const Tensor& v = t.value(id);
                                         const std::size_t rows = v.rows();
                                         const std::size_t cols = v.cols();
                                         if (t.requires_grad(id)) {
                                           Tensor& gp = t.grad_buffer(id);
                                           for (std::size_t r = 0; r < rows; ++r) {
                                             for (std::size_t c = 0; c < cols; ++c) {
                                               gp[r * cols + c] += axis == Axis::kCols
                                                                       ? g[r * total_cols + offset + c]
                                                                       : g[(offset + r) * total_cols + c];
                                             }
                                           }
                                         }
                                         offset += axis == Axis::kCols ? cols : rows;
                                       }
                                     });
}

Var slice_cols(const Var& a, std::size_t begin, std::size_t end) {
  Tensor out = a.value().cols_slice(begin, end);
  const std::size_t ia = a.id();
  const std::size_t src_cols = a.value().cols();
  return a.tape().record("slice_cols", std::move(out), {ia}, [ia, begin, src_cols](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_buffer(ia);
    const std::size_t w = g.cols();
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < w; ++c) ga[r * src_cols + begin + c] += g[r * w + c];
    }
  });
}

Var slice_rows(const Var& a, std::size_t begin, std::size_t end) {
  Tensor out = a.value().rows_slice(begin, end);
  const std::size_t ia = a.id();
  return a.tape().record("slice_rows", std::move(out), {ia}, [ia, begin](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad_buffer(ia);
    const std::size_t offset = begin * g.cols();
    for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
  });
}

Var row_norm(const Var& a) {
  const Tensor& x = a.value();
  if (x.rank() != 2) throw DimensionError("row_norm needs a matrix, got " + shape_string(x.shape()));
  const std::size_t n = x.rows();
  const std::size_t m = x.cols();
  Tensor out({n});
  for (std::size_t r = 0; r < n; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += x(r, c) * x(r, c);
    out[r] = std::sqrt(s);
  }
  const std::size_t ia = a.id();
  return a.tape().record("row_norm", std::move(out), {ia}, [ia, n, m](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t r = 0; r < n; ++r) {
      if (y[r] == 0.0) continue;
      const double k = g[r] / y[r];
      for (std::size_t c = 0; c < m; ++c) ga[r * m + c] += k * x[r * m + c];
    }
  });
}

Var detach(const Var& a) { return a.tape().constant(a.value()); }

}  // namespace cyclevib::nd
