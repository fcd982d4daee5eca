#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace liftpool::kernels {

// One layer of a model description.
//
// kind is one of:
//   "conv"        uses in/out channels, width, groups, out_length
//   "activation"  uses elements (1 FLOP each)
//   "norm"        uses elements (1 FLOP each)
//   "elementwise" uses elements (1 FLOP each)
//   "pool"        fixed-window pooling; not counted
//   "identity"    not counted
struct LayerDesc {
  std::string name;
  std::string component;
  std::string kind;
  std::uint64_t in_channels = 0;
  std::uint64_t out_channels = 0;
  std::uint64_t width = 0;
  std::uint64_t groups = 1;
  std::uint64_t out_length = 0;
  std::uint64_t elements = 0;
};

LayerDesc conv_layer(std::string name, std::string component, std::uint64_t in_channels, std::uint64_t out_channels,
                     std::uint64_t width, std::uint64_t groups, std::uint64_t out_length);
LayerDesc elementwise_layer(std::string name, std::string component, std::string kind, std::uint64_t elements);

struct LayerFlops {
  std::string name;
  std::string component;
  std::uint64_t macs = 0;
  std::uint64_t flops = 0;
};

struct FlopReport {
  std::vector<LayerFlops> layers;
  std::map<std::string, std::uint64_t> component_flops;
  std::uint64_t total_macs = 0;
  std::uint64_t total_flops = 0;
};

// conv MACs = width * in/groups * out * out_length, 2 FLOPs per MAC.
FlopReport count_flops(const std::vector<LayerDesc>& model);

}  // namespace liftpool::kernels
