#pragma once

#include <cstddef>
#include <functional>
#include <unordered_map>
#include <vector>

#include "liftpool/tensor.hpp"

namespace liftpool {

class Tape;

// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

// Ordered record of differentiable operations.
//
// Operations append nodes in execution order; backward() visits them in
// exact reverse order and accumulates gradients additively where a value
// fans out. A tape is consumed by backward() and cannot be reused.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Untracked input: no gradient is kept for it.
  Var constant(Tensor value);
  // Tracked input whose gradient can be read back after backward().
  Var input(Tensor value);
  // Tracked parameter keyed by the address of the caller's tensor. Binding
  // the same tensor twice yields the same Var, so fan-out accumulates.
  Var param(const Tensor& value);

  // Appends the result of an operation. `backward` receives the node id and
  // must add into the gradients of the inputs that require them.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  void backward(Var loss);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Gradient slot, valid only during and after backward().
  Tensor& grad(std::size_t id);
  const Tensor& grad(Var v) const;
  // Gradient of a bound parameter; zeros when the parameter was unused.
  Tensor param_grad(const Tensor& param) const;
  bool has_param(const Tensor& param) const { return params_.contains(&param); }

  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }
  // Bytes held by forward values; used as a working-set estimate.
  std::size_t value_bytes() const noexcept;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> params_;
  bool consumed_ = false;
};

}  // namespace liftpool
