#include "liftpool/pooling.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "liftpool/errors.hpp"
#include "liftpool/ops.hpp"

namespace liftpool::pooling {
namespace {

using kernels::halved_length;
using kernels::padded_index;

// Per output element: the two source offsets and the local derivative of
// the output with respect to each of them.
struct WindowGrad {
  std::size_t first;
  std::size_t second;
  double d_first;
  double d_second;
};

// Runs `window(a, b) -> {y, d_a, d_b}` over every window of every row and
// records a node whose backward applies the stored local derivatives.
template <class WindowFn>
Var pool_windows(Var x, const char* what, WindowFn&& window) {
  const Tensor& xv = x.value();
  require_signal(xv, what);
  const std::size_t len = xv.length(), out_len = halved_length(len);
  Tensor y({xv.batch(), xv.channels(), out_len});
  std::vector<WindowGrad> local;
  local.reserve(y.size());
  for (std::size_t n = 0; n < xv.batch(); ++n) {
    for (std::size_t c = 0; c < xv.channels(); ++c) {
      auto row = xv.row(n, c);
      auto out = y.row(n, c);
      const std::size_t base = (n * xv.channels() + c) * len;
      for (std::size_t j = 0; j < out_len; ++j) {
        const std::size_t i0 = 2 * j, i1 = padded_index(2 * j + 1, len);
        auto [v, da, db] = window(row[i0], row[i1]);
        out[j] = v;
        local.push_back({base + i0, base + i1, da, db});
      }
    }
  }
  return x.tape->record(std::move(y), {x.id}, [local = std::move(local), xi = x.id](Tape& tp, std::size_t self) {
    const Tensor& gy = tp.grad(self);
    Tensor& gx = tp.grad(xi);
    for (std::size_t k = 0; k < local.size(); ++k) {
      gx[local[k].first] += local[k].d_first * gy[k];
      gx[local[k].second] += local[k].d_second * gy[k];
    }
  });
}

struct WindowResult {
  double value, d_first, d_second;
};

double sigmoid(double a) { return a >= 0.0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a)); }

template <class F>
Tensor untaped(const Tensor& x, F&& f) {
  Tape tape;
  return f(tape, tape.constant(x)).value();
}

}  // namespace

PoolMethod parse_pool_method(std::string_view spec) {
  if (spec == "max") return {PoolKind::max};
  if (spec == "avg" || spec == "average") return {PoolKind::average};
  if (spec == "mixed") return {PoolKind::mixed};
  if (spec == "stochastic") return {PoolKind::stochastic};
  if (spec == "soft") return {PoolKind::soft};
  if (spec.starts_with("lp:")) {
    auto rest = spec.substr(3);
    double p = 0.0;
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), p);
    if (ec != std::errc{} || ptr != rest.data() + rest.size() || !std::isfinite(p) || p < 1.0) {
      throw ConfigError("invalid Lp exponent in pool spec '" + std::string(spec) + "' (need finite p >= 1)");
    }
    return {PoolKind::lp, p};
  }
  throw ConfigError("unknown pool method '" + std::string(spec) + "'");
}

std::string pool_method_name(const PoolMethod& m) {
  switch (m.kind) {
    case PoolKind::max: return "max";
    case PoolKind::average: return "avg";
    case PoolKind::mixed: return "mixed";
    case PoolKind::stochastic: return "stochastic";
    case PoolKind::soft: return "soft";
    case PoolKind::lp: {
      char buf[64];
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, m.p);
      return "lp:" + std::string(buf, ptr);
    }
  }
  return "?";
}

Var pool_fixed(PoolKind kind, Var x) {
  if (kind == PoolKind::max) {
    return pool_windows(x, "pool_max", [](double a, double b) {
      return a >= b ? WindowResult{a, 1.0, 0.0} : WindowResult{b, 0.0, 1.0};
    });
  }
  if (kind == PoolKind::average) {
    return pool_windows(x, "pool_avg", [](double a, double b) { return WindowResult{0.5 * (a + b), 0.5, 0.5}; });
  }
  throw ConfigError("pool_fixed supports only max and average");
}

Tensor pool_fixed(PoolKind kind, const Tensor& x) {
  return untaped(x, [kind](Tape&, Var v) { return pool_fixed(kind, v); });
}

Var pool_lp(Var x, double p) {
  if (!std::isfinite(p) || p < 1.0) throw ConfigError("pool_lp: p must be finite and >= 1");
  return pool_windows(x, "pool_lp", [p](double a, double b) {
    const double m = std::max(std::abs(a), std::abs(b));
    if (m == 0.0) return WindowResult{0.0, 0.0, 0.0};
    const double mean = 0.5 * (std::pow(std::abs(a) / m, p) + std::pow(std::abs(b) / m, p));
    const double y = m * std::pow(mean, 1.0 / p);
    auto d = [&](double v) {
      const double s = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
      return 0.5 * s * std::pow(std::abs(v) / y, p - 1.0);
    };
    return WindowResult{y, d(a), d(b)};
  });
}

Tensor pool_lp(const Tensor& x, double p) {
  return untaped(x, [p](Tape&, Var v) { return pool_lp(v, p); });
}

Var pool_mixed(Var x, Var blend_logit) {
  if (x.tape != blend_logit.tape) throw UsageError("pool_mixed: operands on different tapes");
  if (blend_logit.value().size() != 1) throw ShapeError("pool_mixed: blend logit must be a scalar");
  const double lambda = sigmoid(blend_logit.value()[0]);
  Var pooled = pool_windows(x, "pool_mixed", [lambda](double a, double b) {
    const bool first = a >= b;
    const double mx = first ? a : b;
    const double avg = 0.5 * (a + b);
    const double da = lambda * (first ? 1.0 : 0.0) + (1.0 - lambda) * 0.5;
    const double db = lambda * (first ? 0.0 : 1.0) + (1.0 - lambda) * 0.5;
    return WindowResult{lambda * mx + (1.0 - lambda) * avg, da, db};
  });

  // dy/dlogit = (max - avg) * lambda * (1 - lambda), accumulated separately.
  const Tensor& xv = x.value();
  const std::size_t len = xv.length();
  Tensor spread(pooled.shape());
  for (std::size_t n = 0; n < xv.batch(); ++n) {
    for (std::size_t c = 0; c < xv.channels(); ++c) {
      auto row = xv.row(n, c);
      auto out = spread.row(n, c);
      for (std::size_t j = 0; j < out.size(); ++j) {
        const double a = row[2 * j], b = row[padded_index(2 * j + 1, len)];
        out[j] = std::max(a, b) - 0.5 * (a + b);
      }
    }
  }
  Tensor y = pooled.value();
  const double dl = lambda * (1.0 - lambda);
  return x.tape->record(std::move(y), {pooled.id, blend_logit.id},
                        [dl, spread = std::move(spread), pi = pooled.id, li = blend_logit.id](Tape& tp,
                                                                                               std::size_t self) {
                          const Tensor& gy = tp.grad(self);
                          if (tp.requires_grad(pi)) {
                            Tensor& gp = tp.grad(pi);
                            for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += gy[i];
                          }
                          if (tp.requires_grad(li)) {
                            double acc = 0.0;
                            for (std::size_t i = 0; i < gy.size(); ++i) acc += gy[i] * spread[i];
                            tp.grad(li)[0] += acc * dl;
                          }
                        });
}

Tensor pool_mixed(const Tensor& x, double blend_logit) {
  return untaped(x, [blend_logit](Tape& t, Var v) { return pool_mixed(v, t.constant(Tensor::scalar(blend_logit))); });
}

Var pool_stochastic(Var x, std::mt19937_64& rng, PoolMode mode) {
  if (mode == PoolMode::train) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    return pool_windows(x, "pool_stochastic", [&](double a, double b) {
      const double ca = std::max(a, 0.0), cb = std::max(b, 0.0);
      const double total = ca + cb;
      const double u = unit(rng);
      const bool pick_first = total > 0.0 ? u * total < ca : u < 0.5;
      return pick_first ? WindowResult{a, 1.0, 0.0} : WindowResult{b, 0.0, 1.0};
    });
  }
  return pool_windows(x, "pool_stochastic", [](double a, double b) {
    const double ca = std::max(a, 0.0), cb = std::max(b, 0.0);
    const double total = ca + cb;
    if (total == 0.0) return WindowResult{0.5 * (a + b), 0.5, 0.5};
    const double y = (ca * a + cb * b) / total;
    // d/dx_k of sum(c_i x_i) / sum(c_i) with c_i = relu(x_i).
    auto d = [&](double v, double c) { return v > 0.0 ? (2.0 * v - y) / total : c / total; };
    return WindowResult{y, d(a, ca), d(b, cb)};
  });
}

Tensor pool_stochastic(const Tensor& x, std::mt19937_64& rng, PoolMode mode) {
  return untaped(x, [&rng, mode](Tape&, Var v) { return pool_stochastic(v, rng, mode); });
}

Var pool_soft(Var x) {
  return pool_windows(x, "pool_soft", [](double a, double b) {
    const double m = std::max(a, b);
    const double ea = std::exp(a - m), eb = std::exp(b - m);
    const double wa = ea / (ea + eb), wb = eb / (ea + eb);
    const double y = wa * a + wb * b;
    return WindowResult{y, wa * (1.0 + a - y), wb * (1.0 + b - y)};
  });
}

Tensor pool_soft(const Tensor& x) {
  return untaped(x, [](Tape&, Var v) { return pool_soft(v); });
}

}  // namespace liftpool::pooling
