#include "liftpool/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "liftpool/errors.hpp"

namespace liftpool::kernels {
namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw UsageError("operands recorded on different tapes");
  return *a.tape;
}

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

ConvParams make_conv(std::size_t in_channels, std::size_t out_channels, std::size_t width, std::size_t groups,
                     std::mt19937_64& rng) {
  ConvParams p = make_zero_conv(in_channels, out_channels, width, groups);
  const double bound = 1.0 / std::sqrt(static_cast<double>((in_channels / groups) * width));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& w : p.weight.storage()) w = dist(rng);
  return p;
}

ConvParams make_zero_conv(std::size_t in_channels, std::size_t out_channels, std::size_t width,
                          std::size_t groups) {
  if (groups == 0 || width == 0) throw ConfigError("conv groups and width must be positive");
  if (in_channels % groups != 0 || out_channels % groups != 0) {
    throw ShapeError("conv channels " + std::to_string(in_channels) + "->" + std::to_string(out_channels) +
                     " not divisible by groups " + std::to_string(groups));
  }
  return ConvParams{Tensor({out_channels, in_channels / groups, width}, 0.0), Tensor({out_channels}, 0.0), groups};
}

Var conv1d(Var x, Var weight, Var bias, std::size_t groups) {
  Tape& tape = same_tape(x, weight);
  same_tape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  require_signal(xv, "conv1d");
  if (wv.rank() != 3 || groups == 0) throw ShapeError("conv1d: weight must be [out, in/groups, width]");
  const std::size_t n_batch = xv.batch(), c_in = xv.channels(), len = xv.length();
  const std::size_t c_out = wv.dim(0), in_per_group = wv.dim(1), width = wv.dim(2);
  if (width == 0) throw ConfigError("conv1d: kernel width must be positive");
  if (c_out % groups != 0 || in_per_group * groups != c_in) {
    throw ShapeError("conv1d: input has " + std::to_string(c_in) + " channels, weight " +
                     shape_string(wv.shape()) + " with groups " + std::to_string(groups));
  }
  if (bv.size() != c_out) throw ShapeError("conv1d: bias size does not match output channels");
  if (width > 2 * len + 1) {
    throw ConfigError("conv1d: kernel width " + std::to_string(width) + " exceeds 2T+1 for T=" + std::to_string(len));
  }
  const std::size_t out_per_group = c_out / groups;
  const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(width / 2);
  const std::ptrdiff_t T = static_cast<std::ptrdiff_t>(len);

  // Valid output range for tap j: t + j - half in [0, T).
  auto range = [half, T](std::size_t j) {
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(j) - half;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(T, T - off);
    return std::tuple{off, lo, hi};
  };

  Tensor y({n_batch, c_out, len}, 0.0);
  for (std::size_t n = 0; n < n_batch; ++n) {
    for (std::size_t o = 0; o < c_out; ++o) {
      double* yr = y.row(n, o).data();
      std::fill(yr, yr + len, bv[o]);
      const std::size_t g = o / out_per_group;
      for (std::size_t i = 0; i < in_per_group; ++i) {
        const double* xr = xv.row(n, g * in_per_group + i).data();
        const double* wr = wv.values().data() + (o * in_per_group + i) * width;
        for (std::size_t j = 0; j < width; ++j) {
          const double w = wr[j];
          auto [off, lo, hi] = range(j);
          for (std::ptrdiff_t t = lo; t < hi; ++t) yr[t] += w * xr[t + off];
        }
      }
    }
  }

  return tape.record(std::move(y), {x.id, weight.id, bias.id},
                     [=, xi = x.id, wi = weight.id, bi = bias.id](Tape& tp, std::size_t self) {
                       const Tensor& gy = tp.grad(self);
                       const Tensor& xv2 = tp.value(xi);
                       const Tensor& wv2 = tp.value(wi);
                       const bool gx_on = tp.requires_grad(xi);
                       const bool gw_on = tp.requires_grad(wi);
                       const bool gb_on = tp.requires_grad(bi);
                       Tensor* gx = gx_on ? &tp.grad(xi) : nullptr;
                       Tensor* gw = gw_on ? &tp.grad(wi) : nullptr;
                       Tensor* gb = gb_on ? &tp.grad(bi) : nullptr;
                       for (std::size_t n = 0; n < n_batch; ++n) {
                         for (std::size_t o = 0; o < c_out; ++o) {
                           const double* gyr = gy.row(n, o).data();
                           if (gb) {
                             double acc = 0.0;
                             for (std::size_t t = 0; t < len; ++t) acc += gyr[t];
                             (*gb)[o] += acc;
                           }
                           const std::size_t g = o / out_per_group;
                           for (std::size_t i = 0; i < in_per_group; ++i) {
                             const std::size_t ci = g * in_per_group + i;
                             const double* xr = xv2.row(n, ci).data();
                             const std::size_t wbase = (o * in_per_group + i) * width;
                             for (std::size_t j = 0; j < width; ++j) {
                               auto [off, lo, hi] = range(j);
                               if (gw) {
                                 double acc = 0.0;
                                 for (std::ptrdiff_t t = lo; t < hi; ++t) acc += gyr[t] * xr[t + off];
                                 (*gw)[wbase + j] += acc;
                               }
                               if (gx) {
                                 const double w = wv2[wbase + j];
                                 double* gxr = gx->row(n, ci).data();
                                 for (std::ptrdiff_t t = lo; t < hi; ++t) gxr[t + off] += w * gyr[t];
                               }
                             }
                           }
                         }
                       }
                     });
}

Var conv1d(Tape& tape, Var x, const ConvParams& p) {
  return conv1d(x, tape.param(p.weight), tape.param(p.bias), p.groups);
}

Tensor conv1d(const Tensor& x, const ConvParams& p) {
  Tape tape;
  return conv1d(tape, tape.constant(x), p).value();
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

Var activate(Activation kind, Var x) {
  const Tensor& xv = x.value();
  if (!xv.all_finite()) throw NumericalError("activation: non-finite input");
  Tensor y(xv.shape());
  switch (kind) {
    case Activation::relu:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = xv[i] > 0.0 ? xv[i] : 0.0;
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(xv[i]);
      break;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double v = xv[i];
        // Split by sign so exp never overflows.
        y[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      }
      break;
  }
  return x.tape->record(std::move(y), {x.id}, [kind, xi = x.id](Tape& tp, std::size_t self) {
    const Tensor& gy = tp.grad(self);
    const Tensor& yv = tp.value(self);
    const Tensor& xv2 = tp.value(xi);
    Tensor& gx = tp.grad(xi);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      double d = 0.0;
      switch (kind) {
        case Activation::relu: d = xv2[i] > 0.0 ? 1.0 : 0.0; break;
        case Activation::tanh: d = 1.0 - yv[i] * yv[i]; break;
        case Activation::sigmoid: d = yv[i] * (1.0 - yv[i]); break;
      }
      gx[i] += d * gy[i];
    }
  });
}

Tensor activate(Activation kind, const Tensor& x) {
  Tape tape;
  return activate(kind, tape.constant(x)).value();
}

NormKind parse_norm(std::string_view name) {
  if (name == "instance" || name == "in") return NormKind::instance;
  if (name == "batch" || name == "bn") return NormKind::batch;
  throw ConfigError("unknown normalization '" + std::string(name) + "'");
}

NormParams make_norm(std::size_t channels) {
  NormParams p;
  p.gamma = Tensor({channels}, 1.0);
  p.beta = Tensor({channels}, 0.0);
  p.running_mean = Tensor({channels}, 0.0);
  p.running_var = Tensor({channels}, 1.0);
  return p;
}

namespace {

// Groups for standardization: instance -> one group per (n, c); batch -> one
// group per c spanning all n. `stats` optionally supplies fixed mean/var.
struct NormGroups {
  bool per_sample;
  std::size_t n_batch, channels, len;

  std::size_t count() const { return per_sample ? n_batch * channels : channels; }
  std::size_t members() const { return per_sample ? len : n_batch * len; }
  std::size_t channel_of(std::size_t g) const { return per_sample ? g % channels : g; }
  template <class F>
  void for_each_row(std::size_t g, F&& f) const {
    if (per_sample) {
      f(g / channels, g % channels);
    } else {
      for (std::size_t n = 0; n < n_batch; ++n) f(n, g);
    }
  }
};

Var standardize(Var x, Var gamma, Var beta, double eps, bool per_sample, const Tensor* fixed_mean,
                const Tensor* fixed_var, Tensor* batch_mean_out, Tensor* batch_var_out) {
  Tape& tape = same_tape(x, gamma);
  same_tape(x, beta);
  const Tensor& xv = x.value();
  require_signal(xv, "normalize");
  NormGroups groups{per_sample, xv.batch(), xv.channels(), xv.length()};
  if (gamma.value().size() != groups.channels || beta.value().size() != groups.channels) {
    throw ShapeError("normalize: affine parameters do not match channel count");
  }
  if (!(eps > 0.0)) throw ConfigError("normalize: eps must be positive");

  const std::size_t ng = groups.count();
  Tensor normed(xv.shape());
  std::vector<double> inv_std(ng);
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  Tensor y(xv.shape());
  for (std::size_t g = 0; g < ng; ++g) {
    double mean = 0.0, var = 0.0;
    if (fixed_mean) {
      mean = (*fixed_mean)[g];
      var = (*fixed_var)[g];
    } else {
      groups.for_each_row(g, [&](std::size_t n, std::size_t c) {
        for (double v : xv.row(n, c)) mean += v;
      });
      mean /= static_cast<double>(groups.members());
      groups.for_each_row(g, [&](std::size_t n, std::size_t c) {
        for (double v : xv.row(n, c)) var += (v - mean) * (v - mean);
      });
      var /= static_cast<double>(groups.members());
      if (batch_mean_out) {
        (*batch_mean_out)[g] = mean;
        (*batch_var_out)[g] = var;
      }
    }
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[g] = is;
    const std::size_t c = groups.channel_of(g);
    groups.for_each_row(g, [&](std::size_t n, std::size_t ch) {
      auto xr = xv.row(n, ch);
      auto nr = normed.row(n, ch);
      auto yr = y.row(n, ch);
      for (std::size_t t = 0; t < xr.size(); ++t) {
        nr[t] = (xr[t] - mean) * is;
        yr[t] = gv[c] * nr[t] + bv[c];
      }
    });
  }

  const bool stats_fixed = fixed_mean != nullptr;
  return tape.record(
      std::move(y), {x.id, gamma.id, beta.id},
      [groups, inv_std = std::move(inv_std), normed = std::move(normed), stats_fixed, xi = x.id, gi = gamma.id,
       bi = beta.id](Tape& tp, std::size_t self) {
        const Tensor& gy = tp.grad(self);
        const Tensor& gv2 = tp.value(gi);
        Tensor* gx = tp.requires_grad(xi) ? &tp.grad(xi) : nullptr;
        Tensor* gg = tp.requires_grad(gi) ? &tp.grad(gi) : nullptr;
        Tensor* gb = tp.requires_grad(bi) ? &tp.grad(bi) : nullptr;
        const double m = static_cast<double>(groups.members());
        for (std::size_t g = 0; g < groups.count(); ++g) {
          const std::size_t c = groups.channel_of(g);
          double sum_gn = 0.0, sum_gn_n = 0.0, sum_gy = 0.0, sum_gy_n = 0.0;
          groups.for_each_row(g, [&](std::size_t n, std::size_t ch) {
            auto gyr = gy.row(n, ch);
            auto nr = normed.row(n, ch);
            for (std::size_t t = 0; t < gyr.size(); ++t) {
              sum_gy += gyr[t];
              sum_gy_n += gyr[t] * nr[t];
            }
          });
          if (gg) (*gg)[c] += sum_gy_n;
          if (gb) (*gb)[c] += sum_gy;
          if (!gx) continue;
          sum_gn = gv2[c] * sum_gy;
          sum_gn_n = gv2[c] * sum_gy_n;
          const double is = inv_std[g];
          groups.for_each_row(g, [&](std::size_t n, std::size_t ch) {
            auto gyr = gy.row(n, ch);
            auto nr = normed.row(n, ch);
            auto gxr = gx->row(n, ch);
            for (std::size_t t = 0; t < gyr.size(); ++t) {
              const double gn = gv2[c] * gyr[t];
              gxr[t] += stats_fixed ? gn * is : is * (gn - sum_gn / m - nr[t] * sum_gn_n / m);
            }
          });
        }
      });
}

}  // namespace

Var instance_norm(Var x, Var gamma, Var beta, double eps) {
  return standardize(x, gamma, beta, eps, true, nullptr, nullptr, nullptr, nullptr);
}

Var batch_norm_train(Var x, Var gamma, Var beta, NormParams& stats) {
  const std::size_t c = x.value().channels();
  Tensor mean({c}), var({c});
  Var y = standardize(x, gamma, beta, stats.eps, false, nullptr, nullptr, &mean, &var);
  for (std::size_t i = 0; i < c; ++i) {
    stats.running_mean[i] = (1.0 - stats.momentum) * stats.running_mean[i] + stats.momentum * mean[i];
    stats.running_var[i] = (1.0 - stats.momentum) * stats.running_var[i] + stats.momentum * var[i];
  }
  return y;
}

Var batch_norm_eval(Var x, Var gamma, Var beta, const NormParams& stats) {
  return standardize(x, gamma, beta, stats.eps, false, &stats.running_mean, &stats.running_var, nullptr, nullptr);
}

Var normalize(NormKind kind, Tape& tape, Var x, NormParams& p, bool training) {
  Var g = tape.param(p.gamma);
  Var b = tape.param(p.beta);
  if (kind == NormKind::instance) return instance_norm(x, g, b, p.eps);
  return training ? batch_norm_train(x, g, b, p) : batch_norm_eval(x, g, b, p);
}

Tensor normalize(NormKind kind, const Tensor& x, const NormParams& p) {
  Tape tape;
  NormParams copy = p;
  return normalize(kind, tape, tape.constant(x), copy, true).value();
}

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return tape.record(std::move(y), {a.id, b.id}, [ai = a.id, bi = b.id](Tape& tp, std::size_t self) {
    const Tensor& gy = tp.grad(self);
    if (tp.requires_grad(ai)) add_into(tp.grad(ai), gy);
    if (tp.requires_grad(bi)) add_into(tp.grad(bi), gy);
  });
}

Var sub(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return tape.record(std::move(y), {a.id, b.id}, [ai = a.id, bi = b.id](Tape& tp, std::size_t self) {
    const Tensor& gy = tp.grad(self);
    if (tp.requires_grad(ai)) add_into(tp.grad(ai), gy);
    if (tp.requires_grad(bi)) {
      Tensor& gb = tp.grad(bi);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= gy[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return tape.record(std::move(y), {a.id, b.id}, [ai = a.id, bi = b.id](Tape& tp, std::size_t self) {
    const Tensor& gy = tp.grad(self);
    const Tensor& av = tp.value(ai);
    const Tensor& bv2 = tp.value(bi);
    if (tp.requires_grad(ai)) {
      Tensor& ga = tp.grad(ai);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gy[i] * bv2[i];
    }
    if (tp.requires_grad(bi)) {
      Tensor& gb = tp.grad(bi);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += gy[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor y = a.value();
  for (auto& v : y.storage()) v *= factor;
  return a.tape->record(std::move(y), {a.id}, [factor, ai = a.id](Tape& tp, std::size_t self) {
    const Tensor& gy = tp.grad(self);
    Tensor& ga = tp.grad(ai);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += factor * gy[i];
  });
}

Var residual_weight(Var w, Var x) {
  Tape& tape = same_tape(w, x);
  require_same_shape(w.value(), x.value(), "residual_weight");
  const Tensor& wv = w.value();
  const Tensor& xv = x.value();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = (wv[i] - 0.5) * xv[i] + xv[i];
  return tape.record(std::move(y), {w.id, x.id}, [wi = w.id, xi = x.id](Tape& tp, std::size_t self) {
    const Tensor& gy = tp.grad(self);
    const Tensor& wv2 = tp.value(wi);
    const Tensor& xv2 = tp.value(xi);
    if (tp.requires_grad(wi)) {
      Tensor& gw = tp.grad(wi);
      for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += gy[i] * xv2[i];
    }
    if (tp.requires_grad(xi)) {
      Tensor& gx = tp.grad(xi);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i] * (wv2[i] + 0.5);
    }
  });
}

Var concat_channels(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_signal(av, "concat");
  require_signal(bv, "concat");
  if (av.batch() != bv.batch() || av.length() != bv.length()) throw ShapeError("concat: batch/length mismatch");
  const std::size_t ca = av.channels(), cb = bv.channels();
  Tensor y({av.batch(), ca + cb, av.length()});
  for (std::size_t n = 0; n < av.batch(); ++n) {
    for (std::size_t c = 0; c < ca; ++c) std::ranges::copy(av.row(n, c), y.row(n, c).begin());
    for (std::size_t c = 0; c < cb; ++c) std::ranges::copy(bv.row(n, c), y.row(n, ca + c).begin());
  }
  return tape.record(std::move(y), {a.id, b.id}, [ca, cb, ai = a.id, bi = b.id](Tape& tp, std::size_t self) {
    const Tensor& gy = tp.grad(self);
    for (std::size_t n = 0; n < gy.batch(); ++n) {
      if (tp.requires_grad(ai)) {
        Tensor& ga = tp.grad(ai);
        for (std::size_t c = 0; c < ca; ++c) {
          auto src = gy.row(n, c);
          auto dst = ga.row(n, c);
          for (std::size_t t = 0; t < src.size(); ++t) dst[t] += src[t];
        }
      }
      if (tp.requires_grad(bi)) {
        Tensor& gb = tp.grad(bi);
        for (std::size_t c = 0; c < cb; ++c) {
          auto src = gy.row(n, ca + c);
          auto dst = gb.row(n, c);
          for (std::size_t t = 0; t < src.size(); ++t) dst[t] += src[t];
        }
      }
    }
  });
}

Var mean_over_time(Var x) {
  const Tensor& xv = x.value();
  require_signal(xv, "mean_over_time");
  Tensor y({xv.batch(), xv.channels(), 1});
  const double inv = 1.0 / static_cast<double>(xv.length());
  for (std::size_t n = 0; n < xv.batch(); ++n) {
    for (std::size_t c = 0; c < xv.channels(); ++c) {
      double acc = 0.0;
      for (double v : xv.row(n, c)) acc += v;
      y.at(n, c, 0) = acc * inv;
    }
  }
  return x.tape->record(std::move(y), {x.id}, [inv, xi = x.id](Tape& tp, std::size_t self) {
    const Tensor& gy = tp.grad(self);
    Tensor& gx = tp.grad(xi);
    for (std::size_t n = 0; n < gx.batch(); ++n) {
      for (std::size_t c = 0; c < gx.channels(); ++c) {
        const double g = gy.at(n, c, 0) * inv;
        for (double& v : gx.row(n, c)) v += g;
      }
    }
  });
}

Var sum(Var x) {
  double acc = 0.0;
  for (double v : x.value().values()) acc += v;
  return x.tape->record(Tensor::scalar(acc), {x.id}, [xi = x.id](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    for (double& v : tp.grad(xi).storage()) v += g;
  });
}

Var mean_square(Var x) {
  const Tensor& xv = x.value();
  if (xv.empty()) throw ShapeError("mean_square of empty tensor");
  double acc = 0.0;
  for (double v : xv.values()) acc += v * v;
  const double inv = 1.0 / static_cast<double>(xv.size());
  return x.tape->record(Tensor::scalar(acc * inv), {x.id}, [inv, xi = x.id](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    const Tensor& xv2 = tp.value(xi);
    Tensor& gx = tp.grad(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += 2.0 * inv * xv2[i] * g;
  });
}

Var mean_squared_error(Var a, Var b) { return mean_square(sub(a, b)); }

Var dot(Var x, const Tensor& weights) {
  require_same_shape(x.value(), weights, "dot");
  const Tensor& xv = x.value();
  double acc = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) acc += xv[i] * weights[i];
  return x.tape->record(Tensor::scalar(acc), {x.id}, [weights, xi = x.id](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    Tensor& gx = tp.grad(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += weights[i] * g;
  });
}

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& lv = logits.value();
  require_signal(lv, "cross_entropy");
  const std::size_t n_batch = lv.batch(), classes = lv.channels();
  if (lv.length() != 1) throw ShapeError("cross_entropy: logits must be [n, classes, 1]");
  if (labels.size() != n_batch) throw ShapeError("cross_entropy: label count does not match batch");
  Tensor probs({n_batch, classes, 1});
  double loss = 0.0;
  for (std::size_t n = 0; n < n_batch; ++n) {
    if (labels[n] < 0 || static_cast<std::size_t>(labels[n]) >= classes) {
      throw ConfigError("cross_entropy: label out of range");
    }
    double mx = lv.at(n, 0, 0);
    for (std::size_t k = 1; k < classes; ++k) mx = std::max(mx, lv.at(n, k, 0));
    double z = 0.0;
    for (std::size_t k = 0; k < classes; ++k) z += std::exp(lv.at(n, k, 0) - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t k = 0; k < classes; ++k) probs.at(n, k, 0) = std::exp(lv.at(n, k, 0) - log_z);
    loss += log_z - lv.at(n, static_cast<std::size_t>(labels[n]), 0);
  }
  const double inv = 1.0 / static_cast<double>(n_batch);
  std::vector<int> lab(labels.begin(), labels.end());
  return logits.tape->record(Tensor::scalar(loss * inv), {logits.id},
                             [inv, probs = std::move(probs), lab = std::move(lab), li = logits.id](Tape& tp,
                                                                                                  std::size_t self) {
                               const double g = tp.grad(self)[0] * inv;
                               Tensor& gl = tp.grad(li);
                               for (std::size_t n = 0; n < lab.size(); ++n) {
                                 for (std::size_t k = 0; k < gl.channels(); ++k) {
                                   const double target = static_cast<int>(k) == lab[n] ? 1.0 : 0.0;
                                   gl.at(n, k, 0) += g * (probs.at(n, k, 0) - target);
                                 }
                               }
                             });
}

}  // namespace liftpool::kernels
