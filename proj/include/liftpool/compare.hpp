#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "liftpool/dataset.hpp"
#include "liftpool/model.hpp"
#include "liftpool/train.hpp"

namespace liftpool::harness {

struct CompareOptions {
  std::vector<std::string> specs{"max", "avg", "lp:2", "mixed", "stochastic", "soft", "tlp"};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  Task task = Task::band_mix;
  SplitSizes sizes;
  DatasetOptions data;
  ModelConfig model;  // pool is overwritten per experiment
  TrainConfig train;  // seed is overwritten per experiment
  std::size_t threads = 0;  // 0: compare_thread_count()
};

struct ExperimentResult {
  std::string spec;
  std::uint64_t seed = 0;
  double test_acc = 0.0;
  double dev_acc = 0.0;  // after the last epoch
  std::size_t parameters = 0;
};

struct SpecSummary {
  std::string spec;
  double mean_acc = 0.0;
  double std_acc = 0.0;  // population std over seeds
  std::vector<double> accuracies;  // in seed order
  std::size_t parameters = 0;
};

struct CompareReport {
  std::map<std::pair<std::string, std::uint64_t>, ExperimentResult> experiments;
  std::vector<SpecSummary> ranked;  // by mean accuracy, then spec name
};

// One (spec, seed) experiment: datasets and model are both derived from seed.
ExperimentResult run_experiment(const CompareOptions& options, const std::string& spec, std::uint64_t seed);

// Runs every (spec, seed) pair on up to `threads` workers. The report is a
// pure function of the options.
CompareReport run_compare(const CompareOptions& options);

// hardware_concurrency, capped by LIFTPOOL_THREADS when set.
std::size_t compare_thread_count();

// rank,pool,mean_acc,std_acc,seeds,parameters,acc_seed<s>...
std::string compare_csv(const CompareReport& report, const std::vector<std::uint64_t>& seeds);

}  // namespace liftpool::harness
