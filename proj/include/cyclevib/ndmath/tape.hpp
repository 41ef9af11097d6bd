#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cyclevib/ndmath/tensor.hpp"

namespace cyclevib::nd {

/// A trainable tensor. Gradients are not stored here; a Tape hands them
/// back from backward() so a model stays immutable during inference.
struct Parameter {
  std::string name;
  Tensor value;
};

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Gradients produced by one backward pass.
class Gradients {
 public:
  /// Gradient of a parameter registered on the tape; zeros if the loss did not depend on it.
  const Tensor& of(const Parameter& p) const;
  /// Gradient of any recorded node that requires grad.
  const Tensor& of(const Var& v) const;
  bool has(const Parameter& p) const { return params_.contains(&p); }

 private:
  friend class Tape;
  std::vector<Tensor> nodes_;
  std::vector<bool> present_;
  std::unordered_map<const Parameter*, std::size_t> params_;
};

/// Reverse-mode tape. Single-threaded; one backward pass per tape.
class Tape {
 public:
  /// Accumulates the upstream gradient of node `self` into its parents.
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf that does not require grad.
  Var constant(Tensor value);
  /// Leaf that requires grad (e.g. a latent input under test).
  Var variable(Tensor value);
  /// Leaf bound to a parameter. Registering the same parameter twice returns the same node.
  Var parameter(const Parameter& p);

  /// Records an op result. `parents` that require grad make the result require grad.
  Var record(std::string_view op, Tensor value, std::vector<std::size_t> parents, BackwardFn backward);

  /// Runs reverse accumulation from a scalar loss and consumes the tape.
  Gradients backward(const Var& loss);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Upstream gradient of node `id` (valid inside a BackwardFn).
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  /// Gradient buffer of node `id`, zero-initialised on first use.
  Tensor& grad_buffer(std::size_t id);

 private:
  struct Node {
    std::string_view op;
    Tensor value;
    Tensor grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };

  void check_open() const;

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> params_;
  bool consumed_ = false;
};

}  // namespace cyclevib::nd
