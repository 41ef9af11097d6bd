#pragma once

#include <cstddef>
#include <vector>

#include "cyclevib/ndmath/tape.hpp"

// Differentiable operations on tape values. Binary elementwise ops accept
// equal shapes, a row vector (shape (m) or (1 x m)) broadcast over the rows
// of an (n x m) left operand, or a one-element right operand.

namespace cyclevib::nd {

enum class Axis { kRows, kCols };

/// a * b, or a * b^T when `transpose_b` is set.
Var matmul(const Var& a, const Var& b, bool transpose_b = false);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_scalar(const Var& a, double c);
Var scale(const Var& a, double c);

Var tanh(const Var& a);
Var relu(const Var& a);
Var softplus(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var sqrt(const Var& a);
Var abs(const Var& a);

/// Sum of all entries (scalar).
Var sum(const Var& a);
/// Mean of all entries (scalar).
Var mean(const Var& a);
/// kRows reduces over rows giving one value per column; kCols the reverse.
Var sum(const Var& a, Axis axis);
Var mean(const Var& a, Axis axis);

Var concat(const std::vector<Var>& parts, Axis axis);
Var slice_cols(const Var& a, std::size_t begin, std::size_t end);
Var slice_rows(const Var& a, std::size_t begin, std::size_t end);

/// Euclidean norm of each row of a matrix, shape (n). The gradient at a
/// zero row is taken as zero.
Var row_norm(const Var& a);

/// Copy of `a` that does not propagate gradients.
Var detach(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double c, const Var& a) { return scale(a, c); }
inline Var operator*(const Var& a, double c) { return scale(a, c); }

}  // namespace cyclevib::nd
