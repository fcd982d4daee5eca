#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "liftpool/tensor.hpp"

namespace liftpool::kernels {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled: p -= lr * weight_decay * p, independent of the moments.
  double weight_decay = 1e-3;
};

struct AdamState {
  AdamConfig config;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  explicit AdamState(AdamConfig cfg = {}) : config(cfg) {}
};

// One bias-corrected Adam step with decoupled weight decay. `params` and
// `grads` are matched by position; moments are created lazily on the first
// call and must keep their shapes afterwards.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace liftpool::kernels
