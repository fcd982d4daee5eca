#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string_view>

#include "liftpool/tape.hpp"
#include "liftpool/tensor.hpp"

// Differentiable kernels over [batch, channels, time] signals. Every
// function taking Vars records itself on the tape of its inputs.
namespace liftpool::kernels {

struct ConvParams {
  Tensor weight;  // [out, in / groups, width]
  Tensor bias;    // [out]
  std::size_t groups = 1;

  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1) * groups; }
  std::size_t width() const { return weight.dim(2); }
};

// Weights uniform in +-1/sqrt(fan_in), fan_in = (in / groups) * width;
// bias zero.
ConvParams make_conv(std::size_t in_channels, std::size_t out_channels, std::size_t width, std::size_t groups,
                     std::mt19937_64& rng);
ConvParams make_zero_conv(std::size_t in_channels, std::size_t out_channels, std::size_t width,
                          std::size_t groups);

// "Same" zero padding, stride 1, cross-correlation:
//   y[o, t] = b[o] + sum_{i, j} w[o, i, j] * x[g(o) + i, t + j - width / 2]
Var conv1d(Var x, Var weight, Var bias, std::size_t groups);
Var conv1d(Tape& tape, Var x, const ConvParams& p);
Tensor conv1d(const Tensor& x, const ConvParams& p);

enum class Activation { relu, tanh, sigmoid };
Activation parse_activation(std::string_view name);
Var activate(Activation kind, Var x);
Tensor activate(Activation kind, const Tensor& x);

enum class NormKind { instance, batch };
NormKind parse_norm(std::string_view name);

// Per-channel affine scale/shift plus running statistics for batch mode.
struct NormParams {
  Tensor gamma;         // [channels]
  Tensor beta;          // [channels]
  Tensor running_mean;  // [channels], batch mode only
  Tensor running_var;   // [channels], batch mode only
  double eps = 1e-5;
  double momentum = 0.1;
};

NormParams make_norm(std::size_t channels);

// Instance mode standardizes each (sample, channel) over time; batch mode
// standardizes each channel over (batch, time). Population variance.
Var instance_norm(Var x, Var gamma, Var beta, double eps);
// Uses batch statistics and folds them into the running estimates.
Var batch_norm_train(Var x, Var gamma, Var beta, NormParams& stats);
// Uses the running estimates; no statistics are updated.
Var batch_norm_eval(Var x, Var gamma, Var beta, const NormParams& stats);
Var normalize(NormKind kind, Tape& tape, Var x, NormParams& p, bool training);
Tensor normalize(NormKind kind, const Tensor& x, const NormParams& p);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);

// Residual gating: out = (w - 1/2) * x + x, elementwise.
Var residual_weight(Var w, Var x);

Var concat_channels(Var a, Var b);
// Global average over time: [n, c, t] -> [n, c, 1].
Var mean_over_time(Var x);

// Scalars.
Var sum(Var x);
Var mean_square(Var x);
Var mean_squared_error(Var a, Var b);
Var dot(Var x, const Tensor& weights);
// Mean negative log-likelihood of `labels` under softmax(logits), logits
// shaped [n, classes, 1].
Var cross_entropy(Var logits, std::span<const int> labels);

// Output length of a kernel-2 stride-2 downsampler; odd lengths replicate
// the final frame once.
constexpr std::size_t halved_length(std::size_t t) { return (t + 1) / 2; }
// Source frame of position `i` in the replicate-padded signal.
constexpr std::size_t padded_index(std::size_t i, std::size_t t) { return i < t ? i : t - 1; }

}  // namespace liftpool::kernels
