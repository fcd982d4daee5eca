#include "liftpool/flops.hpp"

#include "liftpool/errors.hpp"

namespace liftpool::kernels {

LayerDesc conv_layer(std::string name, std::string component, std::uint64_t in_channels, std::uint64_t out_channels,
                     std::uint64_t width, std::uint64_t groups, std::uint64_t out_length) {
  LayerDesc d;
  d.name = std::move(name);
  d.component = std::move(component);
  d.kind = "conv";
  d.in_channels = in_channels;
  d.out_channels = out_channels;
  d.width = width;
  d.groups = groups;
  d.out_length = out_length;
  return d;
}

LayerDesc elementwise_layer(std::string name, std::string component, std::string kind, std::uint64_t elements) {
  LayerDesc d;
  d.name = std::move(name);
  d.component = std::move(component);
  d.kind = std::move(kind);
  d.elements = elements;
  return d;
}

FlopReport count_flops(const std::vector<LayerDesc>& model) {
  FlopReport report;
  for (const auto& layer : model) {
    LayerFlops f{layer.name, layer.component, 0, 0};
    if (layer.kind == "conv") {
      if (layer.groups == 0 || layer.in_channels % layer.groups != 0 || layer.out_channels % layer.groups != 0) {
        throw ConfigError("count_flops: bad groups for conv layer '" + layer.name + "'");
      }
      f.macs = layer.width * (layer.in_channels / layer.groups) * layer.out_channels * layer.out_length;
      f.flops = 2 * f.macs;
    } else if (layer.kind == "activation" || layer.kind == "norm" || layer.kind == "elementwise") {
      f.flops = layer.elements;
    } else if (layer.kind == "pool" || layer.kind == "identity") {
      // not counted
    } else {
      throw ConfigError("count_flops: unknown layer kind '" + layer.kind + "'");
    }
    report.total_macs += f.macs;
    report.total_flops += f.flops;
    report.component_flops[f.component] += f.flops;
    report.layers.push_back(std::move(f));
  }
  return report;
}

}  // namespace liftpool::kernels
