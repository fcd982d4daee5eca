#include "liftpool/spectrum.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <random>

#include "liftpool/errors.hpp"

namespace liftpool::harness {
namespace {

// FFTW's planner is not re-entrant; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct BandSplit {
  double low = 0.0;
  double high = 0.0;
};

BandSplit split_energy(const Tensor& x) {
  require_signal(x, "band_energy");
  const std::size_t len = x.length();
  if (len < 2) throw ShapeError("band_energy: length must be at least 2");
  const std::size_t bins = len / 2 + 1;
  double* in = fftw_alloc_real(len);
  fftw_complex* out = fftw_alloc_complex(bins);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(len), in, out, FFTW_ESTIMATE);
  }
  BandSplit e;
  for (std::size_t n = 0; n < x.batch(); ++n) {
    for (std::size_t c = 0; c < x.channels(); ++c) {
      auto row = x.row(n, c);
      std::copy(row.begin(), row.end(), in);
      fftw_execute(plan);
      for (std::size_t k = 0; k < bins; ++k) {
        // Bins 1 .. ceil(T/2)-1 stand for themselves and their mirror T-k.
        const double mult = (k == 0 || 2 * k == len) ? 1.0 : 2.0;
        const double power = mult * (out[k][0] * out[k][0] + out[k][1] * out[k][1]) / static_cast<double>(len);
        (4 * k < len ? e.low : e.high) += power;
      }
    }
  }
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return e;
}

}  // namespace

double band_energy(const Tensor& x, Band band) {
  const BandSplit e = split_energy(x);
  return band == Band::low ? e.low : e.high;
}

double signal_energy(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v * v;
  return acc;
}

double high_band_fraction(const Tensor& x) {
  const BandSplit e = split_energy(x);
  const double total = e.low + e.high;
  return total > 0.0 ? e.high / total : 0.0;
}

SpikeSignal spike_signal(std::uint64_t seed, std::size_t length, std::size_t n_spikes) {
  if (length < 16 || n_spikes == 0 || n_spikes * 8 > length) {
    throw ConfigError("spike_signal: need length >= 16 and at most length/8 spikes");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7370696bu};
  std::mt19937_64 rng(seq);
  std::uniform_int_distribution<int> freq(1, 2);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> amp(3.0, 5.0);
  std::bernoulli_distribution negative(0.5);

  SpikeSignal sig;
  sig.x = Tensor({1, 1, length});
  const double f = freq(rng), ph = phase(rng);
  for (std::size_t t = 0; t < length; ++t) {
    sig.x[t] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(t) / static_cast<double>(length) + ph);
  }
  // One spike per equal segment, away from segment edges, keeps them isolated.
  const std::size_t segment = length / n_spikes;
  for (std::size_t k = 0; k < n_spikes; ++k) {
    std::uniform_int_distribution<std::size_t> pos(k * segment + 2, (k + 1) * segment - 3);
    const std::size_t t = pos(rng);
    sig.x[t] += (negative(rng) ? -1.0 : 1.0) * amp(rng);
    sig.spikes.push_back(t);
  }
  return sig;
}

double near_spike_energy_fraction(const Tensor& d, std::span<const std::size_t> spike_frames, std::size_t radius) {
  require_signal(d, "near_spike_energy_fraction");
  const std::size_t len = d.length();
  std::vector<char> near(len, 0);
  for (std::size_t t : spike_frames) {
    const std::size_t j = t / 2;
    const std::size_t lo = j >= radius ? j - radius : 0;
    const std::size_t hi = std::min(len - 1, j + radius);
    for (std::size_t i = lo; i <= hi; ++i) near[i] = 1;
  }
  double inside = 0.0, total = 0.0;
  for (std::size_t n = 0; n < d.batch(); ++n) {
    for (std::size_t c = 0; c < d.channels(); ++c) {
      auto row = d.row(n, c);
      for (std::size_t i = 0; i < len; ++i) {
        const double e = row[i] * row[i];
        total += e;
        if (near[i]) inside += e;
      }
    }
  }
  return total > 0.0 ? inside / total : 0.0;
}

}  // namespace liftpool::harness
