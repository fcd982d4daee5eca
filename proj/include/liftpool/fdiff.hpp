#pragma once

#include <functional>

#include "liftpool/tensor.hpp"

namespace liftpool::kernels {

using ScalarFn = std::function<double(const Tensor&)>;

// Central differences (f(x + eps e_i) - f(x - eps e_i)) / (2 eps) for each
// coordinate i. Independent of the tape; this is the gradient oracle.
Tensor finite_diff_grad(const ScalarFn& fn, const Tensor& x, double eps = 1e-5);

// ||a - b|| / (||a|| + ||b||); zero when both are below `floor`.
double relative_error(const Tensor& a, const Tensor& b, double floor = 1e-12);

}  // namespace liftpool::kernels
