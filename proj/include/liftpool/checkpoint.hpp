#pragma once

#include <string>

#include "json.hpp"
#include "liftpool/tensor.hpp"
#include "liftpool/tlp.hpp"

namespace liftpool::tlp {

inline constexpr int kCheckpointVersion = 1;

// Nested arrays following the tensor's shape; doubles are written in the
// shortest form that parses back to the identical bit pattern.
nlohmann::json tensor_to_json(const Tensor& t);
// Rebuilds a tensor from nested arrays; the nesting defines the shape.
Tensor tensor_from_json(const nlohmann::json& j);

// {format_version, K, fusion, weighting_kernel, alpha_u, alpha_p, channels,
//  sharing, weighting_form, weighting_norm, arch, parameters, buffers}
nlohmann::json tlp_to_json(const TlpParams& p, double alpha_u, double alpha_p);

struct TlpCheckpoint {
  TlpParams params;
  double alpha_u = kDefaultAlpha;
  double alpha_p = kDefaultAlpha;
};

// Throws IoError on a malformed document or a parameter whose shape does
// not match the stored configuration.
TlpCheckpoint tlp_from_json(const nlohmann::json& j);

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

}  // namespace liftpool::tlp
