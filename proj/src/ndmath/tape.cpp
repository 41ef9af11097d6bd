#include "cyclevib/ndmath/tape.hpp"

namespace cyclevib::nd {

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

const Tensor& Gradients::of(const Parameter& p) const {
  auto it = params_.find(&p);
  if (it == params_.end()) throw ContractError("parameter '" + p.name + "' was not recorded on this tape");
  return nodes_[it->second];
}

const Tensor& Gradients::of(const Var& v) const {
  if (v.id() >= nodes_.size() || !present_[v.id()]) {
    throw ContractError("no gradient recorded for node " + std::to_string(v.id()));
  }
  return nodes_[v.id()];
}

void Tape::check_open() const {
  if (consumed_) throw StateError("tape already consumed by backward()");
}

Var Tape::constant(Tensor value) {
  check_open();
  value.require_finite("constant input");
  nodes_.push_back(Node{"constant", std::move(value), {}, false, false, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  check_open();
  value.require_finite("variable input");
  nodes_.push_back(Node{"variable", std::move(value), {}, false, true, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const Parameter& p) {
  check_open();
  if (auto it = params_.find(&p); it != params_.end()) return Var(this, it->second);
  p.value.require_finite("parameter '" + p.name + "'");
  nodes_.push_back(Node{"parameter", p.value, {}, false, true, {}, {}});
  params_.emplace(&p, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
  check_open();
  if (!value.all_finite()) throw NumericError("op '" + std::string(op) + "' produced a non-finite value");
  bool needs = false;
  for (auto p : parents) needs = needs || nodes_[p].requires_grad;
  nodes_.push_back(Node{op, std::move(value), {}, false, needs, std::move(parents),
                        needs ? std::move(backward) : BackwardFn{}});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

Gradients Tape::backward(const Var& loss) {
  check_open();
  if (&loss.tape() != this) throw ContractError("loss was recorded on a different tape");
  if (loss.value().size() != 1 || loss.value().rank() > 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  consumed_ = true;
  const std::size_t root = loss.id();
  if (nodes_[root].requires_grad) grad_buffer(root)[0] = 1.0;
  for (std::size_t i = root + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, i);
    for (auto p : n.parents) {
      if (nodes_[p].has_grad && !nodes_[p].grad.all_finite()) {
        throw NumericError("backward through op '" + std::string(n.op) + "' produced a non-finite gradient");
      }
    }
  }

  Gradients out;
  out.nodes_.resize(nodes_.size());
  out.present_.assign(nodes_.size(), false);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (!n.requires_grad) continue;
    out.present_[i] = true;
    out.nodes_[i] = n.has_grad ? std::move(n.grad) : Tensor(n.value.shape());
  }
  out.params_ = params_;
  return out;
}

}  // namespace cyclevib::nd
