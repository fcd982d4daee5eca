#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "liftpool/ops.hpp"
#include "liftpool/tape.hpp"

// Temporal lift pooling: split into odd/even frames, predict and update
// with tiny conv nets, gate each sub-band residually, fuse.
namespace liftpool::tlp {

using kernels::ConvParams;
using kernels::NormKind;
using kernels::NormParams;

enum class Fusion { sum, concat, bottleneck, s_only };
// How s and d are gated before fusion.
enum class WeightingSharing { independent, shared, none };
enum class WeightingForm { residual, direct };
// standard: Tanh . Conv(k=1) . ReLU . Conv(k=K, g=C); simple: Tanh . Conv(k=K).
enum class SubNetArch { standard, simple };

Fusion parse_fusion(std::string_view name);
std::string fusion_name(Fusion f);
WeightingSharing parse_sharing(std::string_view name);
std::string sharing_name(WeightingSharing s);
WeightingForm parse_weighting_form(std::string_view name);
std::string weighting_form_name(WeightingForm f);
SubNetArch parse_subnet_arch(std::string_view name);
std::string subnet_arch_name(SubNetArch a);

struct TlpConfig {
  std::size_t channels = 1;
  std::size_t kernel = 5;            // predictor / updater width K
  std::size_t weighting_kernel = 5;
  Fusion fusion = Fusion::sum;
  WeightingSharing sharing = WeightingSharing::independent;
  WeightingForm weighting_form = WeightingForm::residual;
  NormKind weighting_norm = NormKind::instance;
  SubNetArch arch = SubNetArch::standard;

  // Channel count of the fused output.
  std::size_t out_channels() const { return fusion == Fusion::concat ? 2 * channels : channels; }
};

// Predictor or updater. `depthwise` is the K-wide grouped conv (or the only
// conv for the simple arch); `pointwise` is unused for the simple arch.
struct SubNet {
  ConvParams depthwise;
  ConvParams pointwise;
};

struct WeightNet {
  ConvParams conv;
  NormParams norm;
};

struct Bottleneck {
  ConvParams conv;
  NormParams norm;
};

struct TlpParams {
  TlpConfig config;
  SubNet predictor;
  SubNet updater;
  WeightNet weight_s;
  WeightNet weight_d;  // unused unless sharing == independent
  std::optional<Bottleneck> bottleneck;

  // Calls f(name, tensor) for every learnable tensor, in a fixed order.
  template <class F>
  void visit(F&& f);
  template <class F>
  void visit(F&& f) const;
  // Calls f(name, norm) for every normalization block with running stats.
  template <class F>
  void visit_norms(F&& f);

  std::size_t parameter_count() const;
};

// Depthwise convs uniform in +-1/sqrt(fan_in); every final conv before a
// Tanh or the weighting norm, and every bias, starts at zero. With these
// values the layer begins as x_e + x_o and the gating is an exact identity.
TlpParams make_tlp(const TlpConfig& config, std::mt19937_64& rng);

struct SplitVars {
  Var odd;   // 1-based odd frames  (0-based even offsets)
  Var even;  // 1-based even frames (0-based odd offsets)
};

struct LiftVars {
  Var s;
  Var d;
  Var x_odd;
  Var x_even;
};

struct TlpOutput {
  Var y;
  Var c_u;
  Var c_p;
  LiftVars lift;
  Var s_weighted;
  Var d_weighted;
};

// Untaped sub-bands.
struct LiftPair {
  Tensor s;
  Tensor d;
};

SplitVars split(Var x);
std::pair<Tensor, Tensor> split(const Tensor& x);  // {odd, even}
// Inverse of split: out[2j] = odd[j], out[2j + 1] = even[j], truncated to `length`.
Tensor interleave(const Tensor& odd, const Tensor& even, std::size_t length);

Var predict(Tape& tape, Var x_even, const TlpParams& p);
Var update(Tape& tape, Var d, const TlpParams& p);

// d = x_odd - P(x_even); s = x_even + U(d).
LiftVars lift(Tape& tape, Var x, const TlpParams& p);
LiftPair lift(const Tensor& x, const TlpParams& p);
// x_even = s - U(d); x_odd = d + P(x_even); interleave and drop padding.
Tensor inverse_lift(const LiftPair& pair, const TlpParams& p, std::size_t length);

// Lifting ladder with arbitrary untaped filters.
struct LiftFilters {
  std::function<Tensor(const Tensor&)> predict;
  std::function<Tensor(const Tensor&)> update;
};
LiftFilters haar_filters();
LiftFilters learned_filters(const TlpParams& p);
LiftPair lift(const Tensor& x, const LiftFilters& filters);
Tensor inverse_lift(const LiftPair& pair, const LiftFilters& filters, std::size_t length);

// Closed-form Haar step: s = (x_odd + x_even) / 2, d = x_odd - x_even.
LiftPair haar_lift(const Tensor& x);
Tensor haar_inverse(const LiftPair& pair, std::size_t length);

struct LiftLosses {
  Var c_u;  // mean (s - x_odd)^2
  Var c_p;  // mean d^2
};
LiftLosses lift_losses(Var s, Var d, Var x_odd);

// W = sigmoid(norm(conv(x))); residual form returns (W - 1/2) x + x.
Var component_weight(Tape& tape, Var x, WeightNet& net, const TlpConfig& config, bool training);
Var fuse(Tape& tape, Fusion strategy, Var s_weighted, Var d_weighted, Bottleneck* bottleneck, bool training);

TlpOutput tlp_forward(Tape& tape, Var x, TlpParams& p, bool training);

struct LayerLoss {
  double c_u = 0.0;
  double c_p = 0.0;
};

struct LossReport {
  double task_loss = 0.0;
  double c_u = 0.0;  // summed over layers
  double c_p = 0.0;  // summed over layers
  double alpha_u = 1e-3;
  double alpha_p = 1e-3;
  double total = 0.0;
};

inline constexpr double kDefaultAlpha = 1e-3;

// total = task + alpha_u * sum c_u + alpha_p * sum c_p.
LossReport total_loss(double task_loss, std::span<const LayerLoss> layers, double alpha_u = kDefaultAlpha,
                      double alpha_p = kDefaultAlpha);
Var total_loss(Var task_loss, std::span<const LiftLosses> layers, double alpha_u, double alpha_p);

// ---------------------------------------------------------------------------

template <class F>
void TlpParams::visit(F&& f) {
  const auto* self = this;
  self->visit([&](const std::string& name, const Tensor& t) { f(name, const_cast<Tensor&>(t)); });
}

template <class F>
void TlpParams::visit(F&& f) const {
  auto conv = [&](const std::string& prefix, const ConvParams& c) {
    f(prefix + ".weight", c.weight);
    f(prefix + ".bias", c.bias);
  };
  auto subnet = [&](const std::string& prefix, const SubNet& s) {
    conv(prefix + ".depthwise", s.depthwise);
    if (config.arch == SubNetArch::standard) conv(prefix + ".pointwise", s.pointwise);
  };
  auto weight_net = [&](const std::string& prefix, const WeightNet& w) {
    conv(prefix + ".conv", w.conv);
    f(prefix + ".norm.gamma", w.norm.gamma);
    f(prefix + ".norm.beta", w.norm.beta);
  };
  subnet("predictor", predictor);
  subnet("updater", updater);
  if (config.sharing != WeightingSharing::none) weight_net("weight_s", weight_s);
  if (config.sharing == WeightingSharing::independent) weight_net("weight_d", weight_d);
  if (bottleneck) {
    conv("fusion.conv", bottleneck->conv);
    f("fusion.norm.gamma", bottleneck->norm.gamma);
    f("fusion.norm.beta", bottleneck->norm.beta);
  }
}

template <class F>
void TlpParams::visit_norms(F&& f) {
  if (config.sharing != WeightingSharing::none) f("weight_s.norm", weight_s.norm);
  if (config.sharing == WeightingSharing::independent) f("weight_d.norm", weight_d.norm);
  if (bottleneck) f("fusion.norm", bottleneck->norm);
}

}  // namespace liftpool::tlp
