#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "liftpool/flops.hpp"
#include "liftpool/model.hpp"

namespace liftpool::harness {

struct BenchOptions {
  std::vector<std::string> specs{"max", "avg", "tlp"};
  std::size_t length = 128;
  std::size_t batch = 16;
  ModelConfig model;
  std::size_t repetitions = 5;
  std::size_t warmup = 2;
  std::uint64_t seed = 0;
  // Accuracy summary: band-mix runs with this many epochs per seed; an
  // empty seed list skips training.
  std::vector<std::uint64_t> accuracy_seeds;
  std::size_t accuracy_epochs = 5;
};

struct MethodBench {
  std::string spec;
  std::size_t parameters = 0;
  kernels::FlopReport flops;
  std::size_t working_set_bytes = 0;  // tape values + gradients + parameters, one training step
  std::vector<double> step_seconds;   // timed repetitions, warm-ups excluded
  double median_seconds = 0.0;
  double throughput = 0.0;  // sequences per second
  std::vector<double> accuracies;
  double acc_mean = 0.0;
  double acc_std = 0.0;
};

struct BenchReport {
  BenchOptions options;
  std::vector<MethodBench> methods;
  // tlp relative to max on the same shell, when both specs are present.
  bool has_overhead = false;
  std::uint64_t tlp_added_flops = 0;
  double tlp_added_fraction = 0.0;  // of the tlp model's total
};

BenchReport run_benchmark(const BenchOptions& options);

// Fields that depend only on the options (FLOPs, shapes, accuracy).
nlohmann::json bench_report_json(const BenchReport& report);
// Wall-clock fields.
nlohmann::json bench_timing_json(const BenchReport& report);

}  // namespace liftpool::harness
