#include "liftpool/model.hpp"

#include "liftpool/errors.hpp"

namespace liftpool::harness {

using kernels::LayerDesc;

PoolSpec parse_pool_spec(std::string_view spec) {
  if (spec == "tlp") return PoolSpec{true, {}};
  return PoolSpec{false, pooling::parse_pool_method(spec)};
}

std::string pool_spec_name(const PoolSpec& spec) {
  return spec.is_tlp ? "tlp" : pooling::pool_method_name(spec.method);
}

Placement parse_placement(std::string_view name) {
  if (name == "both") return Placement::both;
  if (name == "first") return Placement::first;
  if (name == "second") return Placement::second;
  if (name == "none") return Placement::none;
  throw ConfigError("unknown TLP placement '" + std::string(name) + "'");
}

std::string placement_name(Placement p) {
  switch (p) {
    case Placement::both: return "both";
    case Placement::first: return "first";
    case Placement::second: return "second";
    case Placement::none: return "none";
  }
  return "?";
}

std::size_t SequenceModel::parameter_count() const {
  std::size_t n = 0;
  const_cast<SequenceModel*>(this)->visit([&](const std::string&, Tensor& t) { n += t.size(); });
  return n;
}

SequenceModel build_model(const ModelConfig& config, std::uint64_t seed) {
  if (config.in_channels == 0 || config.hidden == 0 || config.classes < 2) {
    throw ConfigError("model needs in_channels >= 1, hidden >= 1, classes >= 2");
  }
  const PoolSpec spec = parse_pool_spec(config.pool);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6d6f646cu};
  std::mt19937_64 rng(seq);

  SequenceModel m;
  m.config = config;
  auto fill_slot = [&](std::size_t index, std::size_t channels) {
    PoolSlot& slot = m.slots[index];
    bool use_tlp = false;
    if (spec.is_tlp) {
      const Placement p = config.placement;
      use_tlp = p == Placement::both || (p == Placement::first && index == 0) || (p == Placement::second && index == 1);
      slot.spec = use_tlp ? spec : PoolSpec{false, {pooling::PoolKind::max}};
    } else {
      slot.spec = spec;
    }
    if (use_tlp) {
      tlp::TlpConfig tc = config.tlp;
      tc.channels = channels;
      slot.tlp = tlp::make_tlp(tc, rng);
      return tc.out_channels();
    }
    if (slot.spec.method.kind == pooling::PoolKind::mixed) slot.blend_logit = Tensor::scalar(0.0);
    return channels;
  };

  m.conv1 = kernels::make_conv(config.in_channels, config.hidden, config.conv_kernel, 1, rng);
  const std::size_t after1 = fill_slot(0, config.hidden);
  m.conv2 = kernels::make_conv(after1, config.hidden, config.conv_kernel, 1, rng);
  const std::size_t after2 = fill_slot(1, config.hidden);
  m.classifier = kernels::make_conv(after2, config.classes, 1, 1, rng);
  return m;
}

namespace {

Var apply_slot(Tape& tape, PoolSlot& slot, Var x, bool training, std::mt19937_64& rng,
               std::vector<tlp::LiftLosses>& losses) {
  if (slot.tlp) {
    tlp::TlpOutput out = tlp::tlp_forward(tape, x, *slot.tlp, training);
    losses.push_back({out.c_u, out.c_p});
    return out.y;
  }
  const auto& m = slot.spec.method;
  switch (m.kind) {
    case pooling::PoolKind::max:
    case pooling::PoolKind::average: return pooling::pool_fixed(m.kind, x);
    case pooling::PoolKind::lp: return pooling::pool_lp(x, m.p);
    case pooling::PoolKind::mixed: return pooling::pool_mixed(x, tape.param(slot.blend_logit));
    case pooling::PoolKind::stochastic:
      return pooling::pool_stochastic(x, rng, training ? pooling::PoolMode::train : pooling::PoolMode::eval);
    case pooling::PoolKind::soft: return pooling::pool_soft(x);
  }
  throw ConfigError("unknown pool kind");
}

}  // namespace

ForwardResult forward(Tape& tape, SequenceModel& model, Var x, bool training, std::mt19937_64& rng) {
  using kernels::Activation;
  ForwardResult r;
  Var h = kernels::activate(Activation::relu, kernels::conv1d(tape, x, model.conv1));
  h = apply_slot(tape, model.slots[0], h, training, rng, r.lift_losses);
  h = kernels::activate(Activation::relu, kernels::conv1d(tape, h, model.conv2));
  h = apply_slot(tape, model.slots[1], h, training, rng, r.lift_losses);
  h = kernels::mean_over_time(h);
  r.logits = kernels::conv1d(tape, h, model.classifier);
  return r;
}

std::vector<LayerDesc> describe_subnet(const tlp::TlpConfig& config, std::size_t out_length,
                                       const std::string& component) {
  const std::size_t c = config.channels, t = out_length;
  std::vector<LayerDesc> layers;
  if (config.arch == tlp::SubNetArch::standard) {
    layers.push_back(kernels::conv_layer(component + ".depthwise", component, c, c, config.kernel, c, t));
    layers.push_back(kernels::elementwise_layer(component + ".relu", component, "activation", c * t));
    layers.push_back(kernels::conv_layer(component + ".pointwise", component, c, c, 1, 1, t));
  } else {
    layers.push_back(kernels::conv_layer(component + ".conv", component, c, c, config.kernel, 1, t));
  }
  layers.push_back(kernels::elementwise_layer(component + ".tanh", component, "activation", c * t));
  return layers;
}

std::vector<LayerDesc> describe_tlp(const tlp::TlpConfig& config, std::size_t in_length,
                                    const std::string& component) {
  const std::size_t c = config.channels, t = kernels::halved_length(in_length), ct = c * t;
  std::vector<LayerDesc> layers;
  auto append = [&](std::vector<LayerDesc> more) { layers.insert(layers.end(), more.begin(), more.end()); };
  append(describe_subnet(config, t, component + ".predictor"));
  layers.push_back(kernels::elementwise_layer(component + ".lift.sub", component, "elementwise", ct));
  append(describe_subnet(config, t, component + ".updater"));
  layers.push_back(kernels::elementwise_layer(component + ".lift.add", component, "elementwise", ct));
  if (config.sharing != tlp::WeightingSharing::none) {
    for (const char* branch : {"weight_s", "weight_d"}) {
      const std::string name = component + "." + branch;
      layers.push_back(kernels::conv_layer(name + ".conv", component, c, c, config.weighting_kernel, 1, t));
      layers.push_back(kernels::elementwise_layer(name + ".norm", component, "norm", ct));
      layers.push_back(kernels::elementwise_layer(name + ".sigmoid", component, "activation", ct));
      const std::uint64_t gate_ops = config.weighting_form == tlp::WeightingForm::residual ? 3 : 1;
      layers.push_back(kernels::elementwise_layer(name + ".gate", component, "elementwise", gate_ops * ct));
    }
  }
  switch (config.fusion) {
    case tlp::Fusion::sum:
      layers.push_back(kernels::elementwise_layer(component + ".fusion.sum", component, "elementwise", ct));
      break;
    case tlp::Fusion::concat:
    case tlp::Fusion::s_only: break;
    case tlp::Fusion::bottleneck:
      layers.push_back(kernels::conv_layer(component + ".fusion.conv", component, 2 * c, c, 1, 1, t));
      layers.push_back(kernels::elementwise_layer(component + ".fusion.norm", component, "norm", ct));
      layers.push_back(kernels::elementwise_layer(component + ".fusion.relu", component, "activation", ct));
      break;
  }
  return layers;
}

std::vector<LayerDesc> describe_model(const SequenceModel& model, std::size_t length) {
  const auto& cfg = model.config;
  std::vector<LayerDesc> layers;
  std::size_t t = length;
  auto conv_block = [&](const std::string& name, const kernels::ConvParams& conv) {
    layers.push_back(kernels::conv_layer(name, "backbone", conv.in_channels(), conv.out_channels(), conv.width(),
                                         conv.groups, t));
    layers.push_back(kernels::elementwise_layer(name + ".relu", "backbone", "activation", conv.out_channels() * t));
  };
  auto pool = [&](std::size_t index) {
    const PoolSlot& slot = model.slots[index];
    const std::string component = "pool" + std::to_string(index + 1);
    if (slot.tlp) {
      auto more = describe_tlp(slot.tlp->config, t, component);
      layers.insert(layers.end(), more.begin(), more.end());
    } else {
      layers.push_back(kernels::elementwise_layer(component + "." + pool_spec_name(slot.spec), component, "pool", 0));
    }
    t = kernels::halved_length(t);
  };
  conv_block("conv1", model.conv1);
  pool(0);
  conv_block("conv2", model.conv2);
  pool(1);
  layers.push_back(kernels::elementwise_layer("mean_over_time", "head", "identity", 0));
  layers.push_back(
      kernels::conv_layer("classifier", "head", model.classifier.in_channels(), cfg.classes, 1, 1, 1));
  return layers;
}

}  // namespace liftpool::harness
