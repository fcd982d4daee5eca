#include "liftpool/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "liftpool/errors.hpp"
#include "liftpool/text.hpp"

namespace liftpool::harness {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint32_t split_tag(std::string_view split) {
  std::uint32_t h = 2166136261u;
  for (char ch : split) h = (h ^ static_cast<unsigned char>(ch)) * 16777619u;
  return h;
}

std::mt19937_64 dataset_rng(Task task, std::uint64_t seed, std::string_view split) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), split_tag(split),
                    static_cast<std::uint32_t>(task) + 17u};
  return std::mt19937_64(seq);
}

void band_mix_sample(std::mt19937_64& rng, const DatasetOptions& o, int label, Tensor& x) {
  const double ratio = band_mix_ratio(label);
  const double low_amp = std::sqrt(2.0 / (1.0 + ratio * ratio));
  const double high_amp = ratio * low_amp;
  std::uniform_int_distribution<int> low_freq(1, 3);
  // Upper half of the spectrum: between T/4 and just below Nyquist.
  const int hi_lo = static_cast<int>(o.length / 4) + 4;
  const int hi_hi = std::max(hi_lo, static_cast<int>(o.length / 2) - 4);
  std::uniform_int_distribution<int> high_freq(hi_lo, hi_hi);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double len = static_cast<double>(o.length);
  for (std::size_t c = 0; c < o.channels; ++c) {
    const double fl = low_freq(rng), fh = high_freq(rng);
    const double pl = phase(rng), ph = phase(rng);
    auto row = x.row(0, c);
    for (std::size_t t = 0; t < o.length; ++t) {
      const double tt = static_cast<double>(t);
      row[t] = low_amp * std::sin(kTwoPi * fl * tt / len + pl) + high_amp * std::sin(kTwoPi * fh * tt / len + ph);
    }
    for (std::size_t t = 0; t < o.length; ++t) {
      const double z = noise(rng);
      row[t] += o.noise_sigma * z;
    }
  }
}

struct Motif {
  int gap;
  double second_sign;
};

Motif spike_motif(int label) {
  static constexpr Motif motifs[] = {{4, +1.0}, {4, -1.0}, {9, +1.0}, {9, -1.0}};
  return motifs[static_cast<std::size_t>(label) % 4];
}

void spike_pattern_sample(std::mt19937_64& rng, const DatasetOptions& o, int label, Tensor& x) {
  const Motif m = spike_motif(label);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::uniform_int_distribution<int> carrier_freq(1, 2);
  std::uniform_int_distribution<int> jitter(-3, 3);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double len = static_cast<double>(o.length);
  constexpr double kSpike = 2.5;
  const int anchors[] = {static_cast<int>(o.length) * 3 / 16, static_cast<int>(o.length) / 2,
                         static_cast<int>(o.length) * 13 / 16};
  for (std::size_t c = 0; c < o.channels; ++c) {
    const double f = carrier_freq(rng), ph = phase(rng);
    const double channel_sign = c % 2 == 0 ? 1.0 : -1.0;
    auto row = x.row(0, c);
    for (std::size_t t = 0; t < o.length; ++t) row[t] = std::sin(kTwoPi * f * static_cast<double>(t) / len + ph);
    for (int a : anchors) {
      const int start = a + jitter(rng);
      const int positions[] = {start, start + m.gap};
      const double signs[] = {1.0, m.second_sign};
      for (int k = 0; k < 2; ++k) {
        if (positions[k] >= 0 && positions[k] < static_cast<int>(o.length)) {
          row[static_cast<std::size_t>(positions[k])] += channel_sign * signs[k] * kSpike;
        }
      }
    }
    for (std::size_t t = 0; t < o.length; ++t) {
      const double z = noise(rng);
      row[t] += o.noise_sigma * z;
    }
  }
}

}  // namespace

Task parse_task(std::string_view name) {
  if (name == "band-mix") return Task::band_mix;
  if (name == "spike-pattern") return Task::spike_pattern;
  throw ConfigError("unknown task '" + std::string(name) + "'");
}

std::string task_name(Task t) { return t == Task::band_mix ? "band-mix" : "spike-pattern"; }

double band_mix_ratio(int label) {
  static constexpr double ratios[] = {0.35, 0.7, 1.4, 2.8};
  return ratios[static_cast<std::size_t>(label) % 4];
}

SyntheticDataset gen_dataset(Task task, std::uint64_t seed, std::size_t n, const DatasetOptions& options,
                             std::string split) {
  if (n < 4) throw ConfigError("dataset needs at least 4 samples");
  if (options.channels == 0 || options.length < 2 || options.classes == 0) {
    throw ConfigError("dataset needs channels >= 1, length >= 2, classes >= 1");
  }
  if (options.classes > 4) throw ConfigError("synthetic tasks define at most 4 classes");
  if (!(options.noise_sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");

  std::mt19937_64 rng = dataset_rng(task, seed, split);
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % options.classes);
  std::shuffle(labels.begin(), labels.end(), rng);

  SyntheticDataset ds;
  ds.task = task;
  ds.split = std::move(split);
  ds.seed = seed;
  ds.options = options;
  ds.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor x({1, options.channels, options.length}, 0.0);
    if (task == Task::band_mix) {
      band_mix_sample(rng, options, labels[i], x);
    } else {
      spike_pattern_sample(rng, options, labels[i], x);
    }
    ds.samples.push_back(Sample{std::move(x), labels[i]});
  }
  return ds;
}

DatasetSplits make_splits(Task task, std::uint64_t seed, const SplitSizes& sizes, const DatasetOptions& options) {
  return DatasetSplits{gen_dataset(task, seed, sizes.train, options, "train"),
                       gen_dataset(task, seed, sizes.dev, options, "dev"),
                       gen_dataset(task, seed, sizes.test, options, "test")};
}

std::string dataset_csv(const SyntheticDataset& ds) {
  std::ostringstream os;
  os << "sample_id,channel,label";
  for (std::size_t t = 0; t < ds.options.length; ++t) os << ",t" << t;
  os << '\n';
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    for (std::size_t c = 0; c < s.signal.channels(); ++c) {
      os << i << ',' << c << ',' << s.label;
      for (double v : s.signal.row(0, c)) os << ',' << format_exact(v);
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace liftpool::harness
