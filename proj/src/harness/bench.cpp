#include "liftpool/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "liftpool/compare.hpp"
#include "liftpool/errors.hpp"
#include "liftpool/ops.hpp"
#include "liftpool/train.hpp"

namespace liftpool::harness {
namespace {

using nlohmann::json;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// One forward + backward on a fixed batch; returns the tape footprint.
std::size_t training_step(SequenceModel& model, const Tensor& x, const std::vector<int>& labels,
                          std::mt19937_64& rng) {
  Tape tape;
  ForwardResult fr = forward(tape, model, tape.constant(x), true, rng);
  Var loss = tlp::total_loss(kernels::cross_entropy(fr.logits, labels), fr.lift_losses, tlp::kDefaultAlpha,
                             tlp::kDefaultAlpha);
  tape.backward(loss);
  return tape.value_bytes();
}

json flops_json(const kernels::FlopReport& f) {
  json layers = json::array();
  for (const auto& l : f.layers) {
    layers.push_back({{"name", l.name}, {"component", l.component}, {"macs", l.macs}, {"flops", l.flops}});
  }
  json components = json::object();
  for (const auto& [k, v] : f.component_flops) components[k] = v;
  return {{"total_macs", f.total_macs}, {"total_flops", f.total_flops}, {"components", components}, {"layers", layers}};
}

}  // namespace

BenchReport run_benchmark(const BenchOptions& options) {
  if (options.specs.empty()) throw ConfigError("bench needs at least one pool spec");
  if (options.repetitions < 5) throw ConfigError("bench needs at least 5 timed repetitions");
  if (options.batch == 0 || options.length < 2) throw ConfigError("bench needs batch >= 1 and length >= 2");

  BenchReport report;
  report.options = options;
  DatasetOptions data;
  data.channels = options.model.in_channels;
  data.classes = options.model.classes;
  data.length = options.length;
  const SyntheticDataset batch_set = gen_dataset(Task::band_mix, options.seed, std::max<std::size_t>(options.batch, 4),
                                                 data, "bench");
  const Tensor x = stack_signals(batch_set, 0, options.batch);
  std::vector<int> labels;
  for (std::size_t i = 0; i < options.batch; ++i) labels.push_back(batch_set.samples[i].label);

  for (const auto& spec : options.specs) {
    MethodBench mb;
    mb.spec = spec;
    ModelConfig mc = options.model;
    mc.pool = spec;
    SequenceModel model = build_model(mc, options.seed);
    mb.parameters = model.parameter_count();
    mb.flops = kernels::count_flops(describe_model(model, options.length));

    std::mt19937_64 rng(options.seed);
    std::size_t tape_bytes = 0;
    for (std::size_t i = 0; i < options.warmup; ++i) tape_bytes = training_step(model, x, labels, rng);
    for (std::size_t i = 0; i < options.repetitions; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      tape_bytes = training_step(model, x, labels, rng);
      mb.step_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    // Values and their gradients, plus the parameters themselves.
    mb.working_set_bytes = 2 * tape_bytes + mb.parameters * sizeof(double);
    mb.median_seconds = median(mb.step_seconds);
    mb.throughput = mb.median_seconds > 0.0 ? static_cast<double>(options.batch) / mb.median_seconds : 0.0;

    if (!options.accuracy_seeds.empty()) {
      CompareOptions co;
      co.specs = {spec};
      co.seeds = options.accuracy_seeds;
      co.model = options.model;
      co.train.epochs = options.accuracy_epochs;
      for (auto seed : options.accuracy_seeds) mb.accuracies.push_back(run_experiment(co, spec, seed).test_acc);
      double sum = 0.0;
      for (double a : mb.accuracies) sum += a;
      mb.acc_mean = sum / static_cast<double>(mb.accuracies.size());
      double var = 0.0;
      for (double a : mb.accuracies) var += (a - mb.acc_mean) * (a - mb.acc_mean);
      mb.acc_std = std::sqrt(var / static_cast<double>(mb.accuracies.size()));
    }
    report.methods.push_back(std::move(mb));
  }

  auto find = [&](const std::string& s) {
    return std::find_if(report.methods.begin(), report.methods.end(), [&](const MethodBench& m) { return m.spec == s; });
  };
  if (auto t = find("tlp"), m = find("max"); t != report.methods.end() && m != report.methods.end()) {
    report.has_overhead = true;
    report.tlp_added_flops = t->flops.total_flops - m->flops.total_flops;
    report.tlp_added_fraction =
        static_cast<double>(report.tlp_added_flops) / static_cast<double>(t->flops.total_flops);
  }
  return report;
}

json bench_report_json(const BenchReport& r) {
  json methods = json::array();
  for (const auto& m : r.methods) {
    json entry{{"spec", m.spec},
               {"parameters", m.parameters},
               {"working_set_bytes", m.working_set_bytes},
               {"flops", flops_json(m.flops)}};
    if (!m.accuracies.empty()) {
      entry["accuracy"] = {{"mean", m.acc_mean}, {"std", m.acc_std}, {"values", m.accuracies}};
    }
    methods.push_back(std::move(entry));
  }
  json j{{"seed", r.options.seed},
         {"length", r.options.length},
         {"batch", r.options.batch},
         {"hidden", r.options.model.hidden},
         {"repetitions", r.options.repetitions},
         {"warmup", r.options.warmup},
         {"accuracy_seeds", r.options.accuracy_seeds},
         {"accuracy_epochs", r.options.accuracy_epochs},
         {"methods", methods}};
  if (r.has_overhead) {
    j["tlp_vs_max"] = {{"added_flops", r.tlp_added_flops}, {"fraction_of_total", r.tlp_added_fraction}};
  }
  return j;
}

json bench_timing_json(const BenchReport& r) {
  json methods = json::array();
  for (const auto& m : r.methods) {
    methods.push_back({{"spec", m.spec},
                       {"median_seconds", m.median_seconds},
                       {"throughput_sequences_per_s", m.throughput},
                       {"step_seconds", m.step_seconds}});
  }
  return {{"timing", "wall-clock, machine-relative"}, {"methods", methods}};
}

}  // namespace liftpool::harness
