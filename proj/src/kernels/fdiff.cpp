#include "liftpool/fdiff.hpp"

#include <cmath>

#include "liftpool/errors.hpp"

namespace liftpool::kernels {

Tensor finite_diff_grad(const ScalarFn& fn, const Tensor& x, double eps) {
  if (!(eps > 0.0)) throw ConfigError("finite_diff_grad: eps must be positive");
  Tensor probe = x;
  Tensor grad(x.shape(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = fn(probe);
    probe[i] = orig - eps;
    const double down = fn(probe);
    probe[i] = orig;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

double relative_error(const Tensor& a, const Tensor& b, double floor) {
  require_same_shape(a, b, "relative_error");
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::sqrt(na) + std::sqrt(nb);
  if (denom < floor) return 0.0;
  return std::sqrt(diff) / denom;
}

}  // namespace liftpool::kernels
