#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "liftpool/tensor.hpp"

namespace liftpool::harness {

enum class Task { band_mix, spike_pattern };
Task parse_task(std::string_view name);
std::string task_name(Task t);

struct DatasetOptions {
  std::size_t channels = 2;
  std::size_t length = 128;
  std::size_t classes = 4;
  double noise_sigma = 0.3;
};

struct Sample {
  Tensor signal;  // [1, channels, length]
  int label = 0;
};

struct SyntheticDataset {
  Task task = Task::band_mix;
  std::string split;
  std::uint64_t seed = 0;
  DatasetOptions options;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

// band-mix: per channel, a low-band and a high-band sinusoid whose amplitude
// ratio depends on the class (total power fixed), plus Gaussian noise.
// spike-pattern: a smooth carrier with a class-specific two-spike motif
// repeated at three anchors, each jittered by up to 3 frames.
// Labels are assigned round-robin and then shuffled, so classes are
// balanced within one sample. Output depends only on (task, seed, split, n).
SyntheticDataset gen_dataset(Task task, std::uint64_t seed, std::size_t n, const DatasetOptions& options = {},
                             std::string split = "train");

// Amplitude ratio high/low for band-mix class `label`.
double band_mix_ratio(int label);

struct DatasetSplits {
  SyntheticDataset train;
  SyntheticDataset dev;
  SyntheticDataset test;
};

struct SplitSizes {
  std::size_t train = 800;
  std::size_t dev = 200;
  std::size_t test = 200;
};

DatasetSplits make_splits(Task task, std::uint64_t seed, const SplitSizes& sizes = {},
                          const DatasetOptions& options = {});

// CSV, one row per (sample, channel): sample_id,channel,label,t0..t{T-1}.
std::string dataset_csv(const SyntheticDataset& ds);

}  // namespace liftpool::harness
