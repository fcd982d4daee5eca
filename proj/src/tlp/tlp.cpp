#include "liftpool/tlp.hpp"

#include "liftpool/errors.hpp"

namespace liftpool::tlp {
namespace {

using kernels::Activation;
using kernels::halved_length;
using kernels::padded_index;

// Gathers frames `offset, offset + 2, ...` of the replicate-padded signal.
Var gather_phase(Var x, std::size_t offset) {
  const Tensor& xv = x.value();
  const std::size_t len = xv.length(), half = halved_length(len);
  Tensor y({xv.batch(), xv.channels(), half});
  for (std::size_t n = 0; n < xv.batch(); ++n) {
    for (std::size_t c = 0; c < xv.channels(); ++c) {
      auto src = xv.row(n, c);
      auto dst = y.row(n, c);
      for (std::size_t j = 0; j < half; ++j) dst[j] = src[padded_index(2 * j + offset, len)];
    }
  }
  return x.tape->record(std::move(y), {x.id}, [offset, len, half, xi = x.id](Tape& tp, std::size_t self) {
    const Tensor& gy = tp.grad(self);
    Tensor& gx = tp.grad(xi);
    for (std::size_t n = 0; n < gy.batch(); ++n) {
      for (std::size_t c = 0; c < gy.channels(); ++c) {
        auto src = gy.row(n, c);
        auto dst = gx.row(n, c);
        for (std::size_t j = 0; j < half; ++j) dst[padded_index(2 * j + offset, len)] += src[j];
      }
    }
  });
}

Var run_subnet(Tape& tape, Var x, const SubNet& net, SubNetArch arch, const char* what) {
  if (x.value().channels() != net.depthwise.in_channels()) {
    throw ShapeError(std::string(what) + ": input has " + std::to_string(x.value().channels()) +
                     " channels, net expects " + std::to_string(net.depthwise.in_channels()));
  }
  Var h = kernels::conv1d(tape, x, net.depthwise);
  if (arch == SubNetArch::standard) {
    h = kernels::activate(Activation::relu, h);
    h = kernels::conv1d(tape, h, net.pointwise);
  }
  return kernels::activate(Activation::tanh, h);
}

template <class F>
Tensor untaped(const Tensor& x, F&& f) {
  Tape tape;
  return f(tape, tape.constant(x)).value();
}

Tensor elementwise(const Tensor& a, const Tensor& b, double sign) {
  require_same_shape(a, b, "lift");
  Tensor y = a;
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += sign * b[i];
  return y;
}

}  // namespace

Fusion parse_fusion(std::string_view name) {
  if (name == "sum") return Fusion::sum;
  if (name == "concat") return Fusion::concat;
  if (name == "bottleneck") return Fusion::bottleneck;
  if (name == "s_only") return Fusion::s_only;
  throw ConfigError("unknown fusion strategy '" + std::string(name) + "'");
}

std::string fusion_name(Fusion f) {
  switch (f) {
    case Fusion::sum: return "sum";
    case Fusion::concat: return "concat";
    case Fusion::bottleneck: return "bottleneck";
    case Fusion::s_only: return "s_only";
  }
  return "?";
}

WeightingSharing parse_sharing(std::string_view name) {
  if (name == "independent") return WeightingSharing::independent;
  if (name == "shared") return WeightingSharing::shared;
  if (name == "none") return WeightingSharing::none;
  throw ConfigError("unknown weighting sharing '" + std::string(name) + "'");
}

std::string sharing_name(WeightingSharing s) {
  switch (s) {
    case WeightingSharing::independent: return "independent";
    case WeightingSharing::shared: return "shared";
    case WeightingSharing::none: return "none";
  }
  return "?";
}

WeightingForm parse_weighting_form(std::string_view name) {
  if (name == "residual") return WeightingForm::residual;
  if (name == "direct") return WeightingForm::direct;
  throw ConfigError("unknown weighting form '" + std::string(name) + "'");
}

std::string weighting_form_name(WeightingForm f) { return f == WeightingForm::residual ? "residual" : "direct"; }

SubNetArch parse_subnet_arch(std::string_view name) {
  if (name == "standard") return SubNetArch::standard;
  if (name == "simple") return SubNetArch::simple;
  throw ConfigError("unknown predictor/updater arch '" + std::string(name) + "'");
}

std::string subnet_arch_name(SubNetArch a) { return a == SubNetArch::standard ? "standard" : "simple"; }

std::size_t TlpParams::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Tensor& t) { n += t.size(); });
  return n;
}

TlpParams make_tlp(const TlpConfig& config, std::mt19937_64& rng) {
  if (config.channels == 0) throw ConfigError("TLP needs at least one channel");
  if (config.kernel == 0 || config.weighting_kernel == 0) throw ConfigError("TLP kernel widths must be positive");
  const std::size_t c = config.channels;
  TlpParams p;
  p.config = config;
  auto subnet = [&] {
    SubNet s;
    if (config.arch == SubNetArch::standard) {
      s.depthwise = kernels::make_conv(c, c, config.kernel, c, rng);
      s.pointwise = kernels::make_zero_conv(c, c, 1, 1);
    } else {
      s.depthwise = kernels::make_zero_conv(c, c, config.kernel, 1);
    }
    return s;
  };
  auto weight_net = [&] {
    return WeightNet{kernels::make_zero_conv(c, c, config.weighting_kernel, 1), kernels::make_norm(c)};
  };
  p.predictor = subnet();
  p.updater = subnet();
  p.weight_s = weight_net();
  p.weight_d = weight_net();
  if (config.fusion == Fusion::bottleneck) {
    p.bottleneck = Bottleneck{kernels::make_conv(2 * c, c, 1, 1, rng), kernels::make_norm(c)};
  }
  return p;
}

SplitVars split(Var x) {
  require_signal(x.value(), "split");
  return SplitVars{gather_phase(x, 0), gather_phase(x, 1)};
}

std::pair<Tensor, Tensor> split(const Tensor& x) {
  Tape tape;
  auto parts = split(tape.constant(x));
  return {parts.odd.value(), parts.even.value()};
}

Tensor interleave(const Tensor& odd, const Tensor& even, std::size_t length) {
  require_same_shape(odd, even, "interleave");
  const std::size_t half = odd.length();
  if (length > 2 * half || halved_length(length) != half) {
    throw ShapeError("interleave: length " + std::to_string(length) + " incompatible with sub-band length " +
                     std::to_string(half));
  }
  Tensor x({odd.batch(), odd.channels(), length});
  for (std::size_t n = 0; n < odd.batch(); ++n) {
    for (std::size_t c = 0; c < odd.channels(); ++c) {
      auto o = odd.row(n, c);
      auto e = even.row(n, c);
      auto dst = x.row(n, c);
      for (std::size_t j = 0; j < half; ++j) {
        dst[2 * j] = o[j];
        if (2 * j + 1 < length) dst[2 * j + 1] = e[j];
      }
    }
  }
  return x;
}

Var predict(Tape& tape, Var x_even, const TlpParams& p) {
  return run_subnet(tape, x_even, p.predictor, p.config.arch, "predict");
}

Var update(Tape& tape, Var d, const TlpParams& p) { return run_subnet(tape, d, p.updater, p.config.arch, "update"); }

LiftVars lift(Tape& tape, Var x, const TlpParams& p) {
  SplitVars parts = split(x);
  Var d = kernels::sub(parts.odd, predict(tape, parts.even, p));
  Var s = kernels::add(parts.even, update(tape, d, p));
  return LiftVars{s, d, parts.odd, parts.even};
}

LiftPair lift(const Tensor& x, const TlpParams& p) {
  Tape tape;
  LiftVars v = lift(tape, tape.constant(x), p);
  return LiftPair{v.s.value(), v.d.value()};
}

Tensor inverse_lift(const LiftPair& pair, const TlpParams& p, std::size_t length) {
  return inverse_lift(pair, learned_filters(p), length);
}

LiftFilters haar_filters() {
  return LiftFilters{[](const Tensor& x_even) { return x_even; },
                     [](const Tensor& d) {
                       Tensor h = d;
                       for (auto& v : h.storage()) v *= 0.5;
                       return h;
                     }};
}

LiftFilters learned_filters(const TlpParams& p) {
  return LiftFilters{[&p](const Tensor& x) { return untaped(x, [&p](Tape& t, Var v) { return predict(t, v, p); }); },
                     [&p](const Tensor& x) { return untaped(x, [&p](Tape& t, Var v) { return update(t, v, p); }); }};
}

LiftPair lift(const Tensor& x, const LiftFilters& filters) {
  require_signal(x, "lift");
  auto [odd, even] = split(x);
  Tensor d = elementwise(odd, filters.predict(even), -1.0);
  Tensor s = elementwise(even, filters.update(d), +1.0);
  return LiftPair{std::move(s), std::move(d)};
}

Tensor inverse_lift(const LiftPair& pair, const LiftFilters& filters, std::size_t length) {
  require_same_shape(pair.s, pair.d, "inverse_lift");
  Tensor even = elementwise(pair.s, filters.update(pair.d), -1.0);
  Tensor odd = elementwise(pair.d, filters.predict(even), +1.0);
  return interleave(odd, even, length);
}

LiftPair haar_lift(const Tensor& x) {
  require_signal(x, "haar_lift");
  auto [odd, even] = split(x);
  LiftPair out{Tensor(odd.shape()), Tensor(odd.shape())};
  for (std::size_t i = 0; i < odd.size(); ++i) {
    out.s[i] = 0.5 * (odd[i] + even[i]);
    out.d[i] = odd[i] - even[i];
  }
  return out;
}

Tensor haar_inverse(const LiftPair& pair, std::size_t length) { return inverse_lift(pair, haar_filters(), length); }

LiftLosses lift_losses(Var s, Var d, Var x_odd) {
  return LiftLosses{kernels::mean_squared_error(s, x_odd), kernels::mean_square(d)};
}

Var component_weight(Tape& tape, Var x, WeightNet& net, const TlpConfig& config, bool training) {
  if (x.value().channels() != net.conv.in_channels()) throw ShapeError("component_weight: channel mismatch");
  Var h = kernels::conv1d(tape, x, net.conv);
  h = kernels::normalize(config.weighting_norm, tape, h, net.norm, training);
  Var w = kernels::activate(Activation::sigmoid, h);
  return config.weighting_form == WeightingForm::residual ? kernels::residual_weight(w, x) : kernels::mul(w, x);
}

Var fuse(Tape& tape, Fusion strategy, Var s_weighted, Var d_weighted, Bottleneck* bottleneck, bool training) {
  require_same_shape(s_weighted.value(), d_weighted.value(), "fuse");
  switch (strategy) {
    case Fusion::sum: return kernels::add(s_weighted, d_weighted);
    case Fusion::concat: return kernels::concat_channels(s_weighted, d_weighted);
    case Fusion::s_only: return s_weighted;
    case Fusion::bottleneck: {
      if (bottleneck == nullptr) throw ConfigError("bottleneck fusion needs fusion parameters");
      Var h = kernels::concat_channels(s_weighted, d_weighted);
      h = kernels::conv1d(tape, h, bottleneck->conv);
      h = kernels::normalize(NormKind::batch, tape, h, bottleneck->norm, training);
      return kernels::activate(Activation::relu, h);
    }
  }
  throw ConfigError("unknown fusion strategy");
}

TlpOutput tlp_forward(Tape& tape, Var x, TlpParams& p, bool training) {
  require_signal(x.value(), "tlp_forward");
  LiftVars l = lift(tape, x, p);
  LiftLosses losses = lift_losses(l.s, l.d, l.x_odd);
  Var s_w = l.s, d_w = l.d;
  switch (p.config.sharing) {
    case WeightingSharing::independent:
      s_w = component_weight(tape, l.s, p.weight_s, p.config, training);
      d_w = component_weight(tape, l.d, p.weight_d, p.config, training);
      break;
    case WeightingSharing::shared:
      s_w = component_weight(tape, l.s, p.weight_s, p.config, training);
      d_w = component_weight(tape, l.d, p.weight_s, p.config, training);
      break;
    case WeightingSharing::none: break;
  }
  Bottleneck* b = p.bottleneck ? &*p.bottleneck : nullptr;
  Var y = fuse(tape, p.config.fusion, s_w, d_w, b, training);
  return TlpOutput{y, losses.c_u, losses.c_p, l, s_w, d_w};
}

LossReport total_loss(double task_loss, std::span<const LayerLoss> layers, double alpha_u, double alpha_p) {
  if (alpha_u < 0.0 || alpha_p < 0.0) throw ConfigError("loss coefficients must be non-negative");
  LossReport r;
  r.task_loss = task_loss;
  r.alpha_u = alpha_u;
  r.alpha_p = alpha_p;
  for (const auto& l : layers) {
    r.c_u += l.c_u;
    r.c_p += l.c_p;
  }
  r.total = task_loss + (alpha_u * r.c_u + alpha_p * r.c_p);
  return r;
}

Var total_loss(Var task_loss, std::span<const LiftLosses> layers, double alpha_u, double alpha_p) {
  if (alpha_u < 0.0 || alpha_p < 0.0) throw ConfigError("loss coefficients must be non-negative");
  if (layers.empty()) return task_loss;
  Var cu = layers[0].c_u, cp = layers[0].c_p;
  for (std::size_t i = 1; i < layers.size(); ++i) {
    cu = kernels::add(cu, layers[i].c_u);
    cp = kernels::add(cp, layers[i].c_p);
  }
  return kernels::add(task_loss, kernels::add(kernels::scale(cu, alpha_u), kernels::scale(cp, alpha_p)));
}

}  // namespace liftpool::tlp
