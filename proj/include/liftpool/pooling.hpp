#pragma once

#include <random>
#include <string>
#include <string_view>

#include "liftpool/tape.hpp"

// Kernel-2, stride-2 temporal downsamplers. Odd lengths replicate the
// final frame once, so every method maps T frames to ceil(T / 2).
namespace liftpool::pooling {

enum class PoolKind { max, average, lp, mixed, stochastic, soft };
enum class PoolMode { train, eval };

struct PoolMethod {
  PoolKind kind = PoolKind::max;
  double p = 2.0;  // lp only
};

// Accepts "max", "avg", "lp:<p>", "mixed", "stochastic", "soft".
PoolMethod parse_pool_method(std::string_view spec);
std::string pool_method_name(const PoolMethod& m);

// Max routes the gradient to the first maximal element of each window;
// average splits it evenly.
Var pool_fixed(PoolKind kind, Var x);
Tensor pool_fixed(PoolKind kind, const Tensor& x);

// y = (mean_window |x|^p)^(1/p), evaluated relative to the window maximum.
Var pool_lp(Var x, double p);
Tensor pool_lp(const Tensor& x, double p);

// y = s * max + (1 - s) * avg with s = sigmoid(blend_logit); blend_logit is
// a scalar tensor [1].
Var pool_mixed(Var x, Var blend_logit);
Tensor pool_mixed(const Tensor& x, double blend_logit);

// Window probabilities proportional to max(x, 0), uniform when all are zero.
// Train mode samples one element; eval mode returns the expectation.
Var pool_stochastic(Var x, std::mt19937_64& rng, PoolMode mode);
Tensor pool_stochastic(const Tensor& x, std::mt19937_64& rng, PoolMode mode);

// y = sum x_i e^{x_i} / sum e^{x_i}.
Var pool_soft(Var x);
Tensor pool_soft(const Tensor& x);

}  // namespace liftpool::pooling
