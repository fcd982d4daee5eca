#include "liftpool/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "liftpool/adam.hpp"
#include "liftpool/checkpoint.hpp"
#include "liftpool/errors.hpp"
#include "liftpool/text.hpp"

namespace liftpool::harness {
namespace {

using nlohmann::json;

constexpr int kModelFormatVersion = 1;

Tensor stack_indexed(const SyntheticDataset& ds, std::span<const std::size_t> indices) {
  const std::size_t c = ds.options.channels, t = ds.options.length;
  Tensor x({indices.size(), c, t});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const Tensor& s = ds.samples[indices[b]].signal;
    std::copy(s.values().begin(), s.values().end(), x.values().begin() + static_cast<std::ptrdiff_t>(b * c * t));
  }
  return x;
}

std::vector<int> labels_of(const SyntheticDataset& ds, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(ds.samples[i].label);
  return out;
}

std::mt19937_64 training_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

// Eval-mode results never depend on the rng, but forward() wants one.
std::mt19937_64& unused_rng() {
  thread_local std::mt19937_64 rng(0);
  return rng;
}

int argmax(const Tensor& logits, std::size_t n) {
  int best = 0;
  for (std::size_t k = 1; k < logits.channels(); ++k) {
    if (logits.at(n, k, 0) > logits.at(n, static_cast<std::size_t>(best), 0)) best = static_cast<int>(k);
  }
  return best;
}

json model_config_json(const ModelConfig& c) {
  return json{{"pool", c.pool},
              {"in_channels", c.in_channels},
              {"hidden", c.hidden},
              {"classes", c.classes},
              {"conv_kernel", c.conv_kernel},
              {"placement", placement_name(c.placement)},
              {"K", c.tlp.kernel},
              {"weighting_kernel", c.tlp.weighting_kernel},
              {"fusion", tlp::fusion_name(c.tlp.fusion)},
              {"sharing", tlp::sharing_name(c.tlp.sharing)},
              {"weighting_form", tlp::weighting_form_name(c.tlp.weighting_form)},
              {"weighting_norm", c.tlp.weighting_norm == kernels::NormKind::instance ? "instance" : "batch"},
              {"arch", tlp::subnet_arch_name(c.tlp.arch)}};
}

ModelConfig model_config_from_json(const json& j) {
  try {
    ModelConfig c;
    c.pool = j.at("pool").get<std::string>();
    c.in_channels = j.at("in_channels").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.classes = j.at("classes").get<std::size_t>();
    c.conv_kernel = j.at("conv_kernel").get<std::size_t>();
    c.placement = parse_placement(j.at("placement").get<std::string>());
    c.tlp.kernel = j.at("K").get<std::size_t>();
    c.tlp.weighting_kernel = j.at("weighting_kernel").get<std::size_t>();
    c.tlp.fusion = tlp::parse_fusion(j.at("fusion").get<std::string>());
    c.tlp.sharing = tlp::parse_sharing(j.at("sharing").get<std::string>());
    c.tlp.weighting_form = tlp::parse_weighting_form(j.at("weighting_form").get<std::string>());
    c.tlp.weighting_norm = kernels::parse_norm(j.at("weighting_norm").get<std::string>());
    c.tlp.arch = tlp::parse_subnet_arch(j.at("arch").get<std::string>());
    return c;
  } catch (const json::exception& e) {
    throw IoError(std::string("model checkpoint config: ") + e.what());
  } catch (const ConfigError& e) {
    throw IoError(std::string("model checkpoint config: ") + e.what());
  }
}

}  // namespace

Tensor stack_signals(const SyntheticDataset& ds, std::size_t first, std::size_t count) {
  if (first + count > ds.size()) throw ShapeError("stack_signals: range exceeds dataset");
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), first);
  return stack_indexed(ds, idx);
}

TrainResult train(SequenceModel& model, const SyntheticDataset& train_set, const SyntheticDataset& dev_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  if (train_set.size() == 0) throw ConfigError("training set is empty");
  if (config.batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(config.lr >= 0.0) || !std::isfinite(config.lr)) throw ConfigError("learning rate must be finite and >= 0");

  kernels::AdamConfig adam_cfg;
  adam_cfg.lr = config.lr;
  adam_cfg.weight_decay = config.weight_decay;
  kernels::AdamState adam(adam_cfg);

  std::vector<Tensor*> params;
  model.visit([&](const std::string&, Tensor& t) { params.push_back(&t); });

  std::mt19937_64 order_rng = training_rng(config.seed, 0x6f726472u);
  std::mt19937_64 pool_rng = training_rng(config.seed, 0x706f6f6cu);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    EpochMetrics m;
    m.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < order.size(); first += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - first);
      std::span<const std::size_t> idx(order.data() + first, count);
      const std::vector<int> labels = labels_of(train_set, idx);

      Tape tape;
      Var x = tape.constant(stack_indexed(train_set, idx));
      ForwardResult fr = forward(tape, model, x, true, pool_rng);
      Var task = kernels::cross_entropy(fr.logits, labels);
      Var total = tlp::total_loss(task, fr.lift_losses, config.alpha_u, config.alpha_p);

      double cu = 0.0, cp = 0.0;
      for (const auto& l : fr.lift_losses) {
        cu += l.c_u.value().item();
        cp += l.c_p.value().item();
      }
      const double total_v = total.value().item();
      if (!std::isfinite(total_v)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(batches + 1) + " (task " + format_exact(task.value().item()) + ")");
      }
      tape.backward(total);
      std::vector<Tensor> grads;
      grads.reserve(params.size());
      for (Tensor* p : params) grads.push_back(tape.param_grad(*p));
      kernels::adam_step(params, grads, adam);

      m.task_loss += task.value().item();
      m.c_u += cu;
      m.c_p += cp;
      m.total += total_v;
      ++batches;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    m.task_loss *= inv;
    m.c_u *= inv;
    m.c_p *= inv;
    m.total *= inv;
    m.dev_acc = dev_set.size() > 0 ? evaluate(model, dev_set) : 0.0;
    result.log.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  result.train_acc = evaluate(model, train_set);
  return result;
}

std::vector<int> predict_labels(const SequenceModel& model, const SyntheticDataset& ds) {
  if (ds.size() == 0) throw ConfigError("cannot evaluate on an empty dataset");
  SequenceModel local = model;
  std::vector<int> out;
  out.reserve(ds.size());
  constexpr std::size_t kChunk = 64;
  for (std::size_t first = 0; first < ds.size(); first += kChunk) {
    const std::size_t count = std::min(kChunk, ds.size() - first);
    Tape tape;
    Var x = tape.constant(stack_signals(ds, first, count));
    ForwardResult fr = forward(tape, local, x, false, unused_rng());
    for (std::size_t n = 0; n < count; ++n) out.push_back(argmax(fr.logits.value(), n));
  }
  return out;
}

double evaluate(const SequenceModel& model, const SyntheticDataset& ds) {
  const std::vector<int> pred = predict_labels(model, ds);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == ds.samples[i].label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

tlp::LossReport batch_loss(SequenceModel& model, const SyntheticDataset& ds, std::size_t first, std::size_t count,
                           double alpha_u, double alpha_p) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), first);
  const std::vector<int> labels = labels_of(ds, idx);
  Tape tape;
  Var x = tape.constant(stack_signals(ds, first, count));
  ForwardResult fr = forward(tape, model, x, false, unused_rng());
  Var task = kernels::cross_entropy(fr.logits, labels);
  std::vector<tlp::LayerLoss> layers;
  for (const auto& l : fr.lift_losses) layers.push_back({l.c_u.value().item(), l.c_p.value().item()});
  return tlp::total_loss(task.value().item(), layers, alpha_u, alpha_p);
}

std::string metrics_row(const EpochMetrics& m) {
  std::ostringstream os;
  os << m.epoch << ',' << format_exact(m.task_loss) << ',' << format_exact(m.c_u) << ',' << format_exact(m.c_p) << ','
     << format_exact(m.total) << ',' << format_exact(m.dev_acc);
  return os.str();
}

std::string metrics_csv(const std::vector<EpochMetrics>& log) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& m : log) out += metrics_row(m) + "\n";
  return out;
}

json model_to_json(const SequenceModel& model, const TrainConfig& config) {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["model"] = model_config_json(model.config);
  j["train"] = json{{"lr", config.lr},
                    {"epochs", config.epochs},
                    {"batch_size", config.batch_size},
                    {"alpha_u", config.alpha_u},
                    {"alpha_p", config.alpha_p},
                    {"weight_decay", config.weight_decay},
                    {"seed", config.seed}};
  json params = json::object();
  json layers = json::object();
  SequenceModel& m = const_cast<SequenceModel&>(model);
  for (std::size_t i = 0; i < m.slots.size(); ++i) {
    if (m.slots[i].tlp) {
      layers["pool" + std::to_string(i + 1)] = tlp::tlp_to_json(*m.slots[i].tlp, config.alpha_u, config.alpha_p);
    }
  }
  m.visit([&](const std::string& name, Tensor& t) {
    const bool in_tlp = (name.starts_with("pool1.") && m.slots[0].tlp) || (name.starts_with("pool2.") && m.slots[1].tlp);
    if (!in_tlp) params[name] = tlp::tensor_to_json(t);
  });
  j["parameters"] = std::move(params);
  j["tlp_layers"] = std::move(layers);
  return j;
}

SequenceModel model_from_json(const json& j) {
  if (!j.is_object() || !j.contains("model") || !j.contains("parameters")) {
    throw IoError("not a model checkpoint (expected 'model' and 'parameters')");
  }
  if (j.value("format_version", 0) != kModelFormatVersion) throw IoError("unsupported model checkpoint version");
  SequenceModel m = build_model(model_config_from_json(j.at("model")), 0);
  const json& params = j.at("parameters");
  const json layers = j.value("tlp_layers", json::object());
  for (std::size_t i = 0; i < m.slots.size(); ++i) {
    if (!m.slots[i].tlp) continue;
    const std::string key = "pool" + std::to_string(i + 1);
    if (!layers.contains(key)) throw IoError("model checkpoint is missing TLP layer '" + key + "'");
    tlp::TlpCheckpoint ck = tlp::tlp_from_json(layers.at(key));
    const auto& want = m.slots[i].tlp->config;
    const auto& got = ck.params.config;
    if (got.channels != want.channels || got.kernel != want.kernel || got.fusion != want.fusion ||
        got.sharing != want.sharing || got.arch != want.arch) {
      throw IoError("TLP layer '" + key + "' does not match the model config");
    }
    m.slots[i].tlp = std::move(ck.params);
  }
  m.visit([&](const std::string& name, Tensor& t) {
    const bool in_tlp = (name.starts_with("pool1.") && m.slots[0].tlp) || (name.starts_with("pool2.") && m.slots[1].tlp);
    if (in_tlp) return;
    if (!params.contains(name)) throw IoError("model checkpoint is missing parameter '" + name + "'");
    Tensor loaded = tlp::tensor_from_json(params.at(name));
    if (loaded.shape() != t.shape()) throw IoError("model checkpoint parameter '" + name + "' has the wrong shape");
    t = std::move(loaded);
  });
  return m;
}

}  // namespace liftpool::harness
