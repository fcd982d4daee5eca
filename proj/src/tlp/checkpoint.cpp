#include "liftpool/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "liftpool/errors.hpp"

namespace liftpool::tlp {
namespace {

using nlohmann::json;

json nest(const Tensor& t, std::size_t axis, std::size_t& offset) {
  json arr = json::array();
  const std::size_t extent = t.shape()[axis];
  for (std::size_t i = 0; i < extent; ++i) {
    if (axis + 1 == t.rank()) {
      arr.push_back(t[offset++]);
    } else {
      arr.push_back(nest(t, axis + 1, offset));
    }
  }
  return arr;
}

void flatten(const json& j, std::size_t depth, Shape& shape, std::vector<double>& out) {
  if (!j.is_array()) {
    if (!j.is_number()) throw IoError("checkpoint tensor contains a non-numeric entry");
    if (depth != shape.size()) throw IoError("checkpoint tensor is ragged");
    out.push_back(j.get<double>());
    return;
  }
  if (depth == shape.size()) {
    shape.push_back(j.size());
  } else if (depth > shape.size() || shape[depth] != j.size()) {
    throw IoError("checkpoint tensor is ragged");
  }
  for (const auto& e : j) flatten(e, depth + 1, shape, out);
}

template <class T>
T required(const json& j, const char* key) {
  if (!j.contains(key)) throw IoError(std::string("checkpoint is missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint field '") + key + "': " + e.what());
  }
}

}  // namespace

json tensor_to_json(const Tensor& t) {
  if (t.rank() == 0) return json::array();
  std::size_t offset = 0;
  return nest(t, 0, offset);
}

Tensor tensor_from_json(const json& j) {
  if (!j.is_array()) throw IoError("checkpoint tensor must be an array");
  Shape shape;
  std::vector<double> data;
  flatten(j, 0, shape, data);
  if (shape_size(shape) != data.size()) throw IoError("checkpoint tensor is ragged");
  return Tensor(std::move(shape), std::move(data));
}

json tlp_to_json(const TlpParams& p, double alpha_u, double alpha_p) {
  json j;
  j["format_version"] = kCheckpointVersion;
  j["K"] = p.config.kernel;
  j["fusion"] = fusion_name(p.config.fusion);
  j["weighting_kernel"] = p.config.weighting_kernel;
  j["alpha_u"] = alpha_u;
  j["alpha_p"] = alpha_p;
  j["channels"] = p.config.channels;
  j["sharing"] = sharing_name(p.config.sharing);
  j["weighting_form"] = weighting_form_name(p.config.weighting_form);
  j["weighting_norm"] = p.config.weighting_norm == NormKind::instance ? "instance" : "batch";
  j["arch"] = subnet_arch_name(p.config.arch);
  json params = json::object();
  p.visit([&](const std::string& name, const Tensor& t) { params[name] = tensor_to_json(t); });
  j["parameters"] = std::move(params);
  json buffers = json::object();
  const_cast<TlpParams&>(p).visit_norms([&](const std::string& name, NormParams& n) {
    buffers[name + ".running_mean"] = tensor_to_json(n.running_mean);
    buffers[name + ".running_var"] = tensor_to_json(n.running_var);
  });
  j["buffers"] = std::move(buffers);
  return j;
}

TlpCheckpoint tlp_from_json(const json& j) {
  if (!j.is_object()) throw IoError("checkpoint must be a JSON object");
  const int version = required<int>(j, "format_version");
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint format_version " + std::to_string(version));
  }
  TlpConfig cfg;
  try {
    cfg.kernel = required<std::size_t>(j, "K");
    cfg.weighting_kernel = required<std::size_t>(j, "weighting_kernel");
    cfg.channels = required<std::size_t>(j, "channels");
    cfg.fusion = parse_fusion(required<std::string>(j, "fusion"));
    cfg.sharing = parse_sharing(j.value("sharing", std::string("independent")));
    cfg.weighting_form = parse_weighting_form(j.value("weighting_form", std::string("residual")));
    cfg.weighting_norm = kernels::parse_norm(j.value("weighting_norm", std::string("instance")));
    cfg.arch = parse_subnet_arch(j.value("arch", std::string("standard")));
  } catch (const ConfigError& e) {
    throw IoError(std::string("checkpoint config: ") + e.what());
  }

  TlpCheckpoint ck;
  ck.alpha_u = required<double>(j, "alpha_u");
  ck.alpha_p = required<double>(j, "alpha_p");
  std::mt19937_64 unused_rng(0);
  ck.params = make_tlp(cfg, unused_rng);

  const json& params = j.contains("parameters") ? j.at("parameters") : throw IoError("checkpoint has no parameters");
  ck.params.visit([&](const std::string& name, Tensor& t) {
    if (!params.contains(name)) throw IoError("checkpoint is missing parameter '" + name + "'");
    Tensor loaded = tensor_from_json(params.at(name));
    if (loaded.shape() != t.shape()) {
      throw IoError("checkpoint parameter '" + name + "' has shape " + shape_string(loaded.shape()) + ", expected " +
                    shape_string(t.shape()));
    }
    t = std::move(loaded);
  });
  if (j.contains("buffers")) {
    const json& buffers = j.at("buffers");
    ck.params.visit_norms([&](const std::string& name, NormParams& n) {
      for (auto [suffix, slot] : {std::pair{".running_mean", &n.running_mean}, {".running_var", &n.running_var}}) {
        const std::string key = name + suffix;
        if (!buffers.contains(key)) continue;
        Tensor loaded = tensor_from_json(buffers.at(key));
        if (loaded.shape() != slot->shape()) throw IoError("checkpoint buffer '" + key + "' has wrong shape");
        *slot = std::move(loaded);
      }
    });
  }
  return ck;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(1) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("malformed JSON in '" + path + "': " + e.what());
  }
}

}  // namespace liftpool::tlp
