#include "liftpool/adam.hpp"

#include <cmath>

#include "liftpool/errors.hpp"

namespace liftpool::kernels {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state) {
  const AdamConfig& cfg = state.config;
  if (!(cfg.lr >= 0.0)) throw ConfigError("adam: learning rate must be non-negative");
  if (params.size() != grads.size()) throw ShapeError("adam: parameter and gradient counts differ");
  if (state.first_moment.empty()) {
    for (const Tensor* p : params) {
      state.first_moment.emplace_back(p->shape(), 0.0);
      state.second_moment.emplace_back(p->shape(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) throw ShapeError("adam: parameter count changed between steps");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k]->shape() != grads[k].shape() || params[k]->shape() != state.first_moment[k].shape()) {
      throw ShapeError("adam: shape mismatch for parameter " + std::to_string(k));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = grads[k];
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= cfg.lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * p[i]);
    }
  }
}

}  // namespace liftpool::kernels
