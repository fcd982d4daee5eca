#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "liftpool/flops.hpp"
#include "liftpool/ops.hpp"
#include "liftpool/pooling.hpp"
#include "liftpool/tape.hpp"
#include "liftpool/tlp.hpp"

namespace liftpool::harness {

// A pool slot filler: a baseline method or temporal lift pooling.
struct PoolSpec {
  bool is_tlp = false;
  pooling::PoolMethod method;
};

// Accepts "max", "avg", "lp:<p>", "mixed", "stochastic", "soft", "tlp".
PoolSpec parse_pool_spec(std::string_view spec);
std::string pool_spec_name(const PoolSpec& spec);

// Which slots receive TLP when the pool spec is "tlp"; the others use max
// pooling. Ignored for baseline specs, which fill both slots.
enum class Placement { both, first, second, none };
Placement parse_placement(std::string_view name);
std::string placement_name(Placement p);

struct ModelConfig {
  std::string pool = "tlp";
  std::size_t in_channels = 2;
  std::size_t hidden = 16;
  std::size_t classes = 4;
  std::size_t conv_kernel = 5;
  Placement placement = Placement::both;
  // channels is overwritten per slot.
  tlp::TlpConfig tlp;
};

struct PoolSlot {
  PoolSpec spec;
  std::optional<tlp::TlpParams> tlp;
  Tensor blend_logit;  // [1], mixed pooling only
};

// conv(k=5) -> ReLU -> pool -> conv(k=5) -> ReLU -> pool -> mean over time
// -> pointwise classifier.
struct SequenceModel {
  ModelConfig config;
  kernels::ConvParams conv1;
  kernels::ConvParams conv2;
  std::array<PoolSlot, 2> slots;
  kernels::ConvParams classifier;

  template <class F>
  void visit(F&& f);
  std::size_t parameter_count() const;
};

SequenceModel build_model(const ModelConfig& config, std::uint64_t seed);

struct ForwardResult {
  Var logits;  // [batch, classes, 1]
  std::vector<tlp::LiftLosses> lift_losses;
};

// Training mode samples stochastic pooling from `rng` and updates batch-norm
// statistics; eval mode is deterministic.
ForwardResult forward(Tape& tape, SequenceModel& model, Var x, bool training, std::mt19937_64& rng);

// Layer-by-layer description for count_flops at input length `length`.
std::vector<kernels::LayerDesc> describe_model(const SequenceModel& model, std::size_t length);
std::vector<kernels::LayerDesc> describe_tlp(const tlp::TlpConfig& config, std::size_t in_length,
                                             const std::string& component);
// Predictor or updater alone: K*C*T' + C*C*T' MACs for the standard arch.
std::vector<kernels::LayerDesc> describe_subnet(const tlp::TlpConfig& config, std::size_t out_length,
                                                const std::string& component);

// ---------------------------------------------------------------------------

template <class F>
void SequenceModel::visit(F&& f) {
  auto conv = [&](const std::string& prefix, kernels::ConvParams& c) {
    f(prefix + ".weight", c.weight);
    f(prefix + ".bias", c.bias);
  };
  conv("conv1", conv1);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const std::string prefix = "pool" + std::to_string(i + 1);
    if (slots[i].tlp) {
      slots[i].tlp->visit([&](const std::string& name, Tensor& t) { f(prefix + "." + name, t); });
    } else if (slots[i].spec.method.kind == pooling::PoolKind::mixed) {
      f(prefix + ".blend_logit", slots[i].blend_logit);
    }
    if (i == 0) conv("conv2", conv2);
  }
  conv("classifier", classifier);
}

}  // namespace liftpool::harness
