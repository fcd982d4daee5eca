#include "liftpool/tape.hpp"

#include "liftpool/errors.hpp"

namespace liftpool {

const Tensor& Var::value() const {
  if (tape == nullptr) throw UsageError("unbound Var");
  return tape->value(id);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::input(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::param(const Tensor& value) {
  if (auto it = params_.find(&value); it != params_.end()) return Var{this, it->second};
  Var v = input(value);
  params_.emplace(&value, v.id);
  return v;
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  if (consumed_) throw UsageError("recording onto a consumed tape");
  bool needs = false;
  for (auto id : inputs) needs = needs || nodes_.at(id).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, std::move(inputs), needs ? std::move(backward) : BackwardFn{}, needs});
  return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw UsageError("loss was recorded on a different tape");
  if (nodes_.empty()) throw UsageError("backward on an empty tape");
  if (consumed_) throw UsageError("tape already consumed by backward");
  if (nodes_[loss.id].value.size() != 1) throw UsageError("backward needs a scalar loss");
  consumed_ = true;

  for (auto& n : nodes_) {
    if (n.requires_grad) n.grad = Tensor(n.value.shape(), 0.0);
  }
  if (!nodes_[loss.id].requires_grad) return;
  nodes_[loss.id].grad[0] = 1.0;

  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward) n.backward(*this, i);
  }
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape(), 0.0);
  return n.grad;
}

const Tensor& Tape::grad(Var v) const {
  if (!consumed_) throw UsageError("gradients are available only after backward");
  const Node& n = nodes_.at(v.id);
  if (!n.requires_grad) throw UsageError("gradient requested for an untracked value");
  return n.grad;
}

Tensor Tape::param_grad(const Tensor& param) const {
  auto it = params_.find(&param);
  if (it == params_.end()) return Tensor(param.shape(), 0.0);
  return grad(Var{const_cast<Tape*>(this), it->second});
}

std::size_t Tape::value_bytes() const noexcept {
  std::size_t bytes = 0;
  for (const auto& n : nodes_) bytes += n.value.size() * sizeof(double);
  return bytes;
}

}  // namespace liftpool
