#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "liftpool/tensor.hpp"

namespace liftpool::harness {

// Each row of length T is split at a quarter of the sampling rate: DFT bin k
// (two-sided, frequency f = min(k, T - k)) is low when 4f < T, high
// otherwise. low + high equals the time-domain energy.
enum class Band { low, high };

double band_energy(const Tensor& x, Band band);
double signal_energy(const Tensor& x);
// high / (low + high), 0 for a zero signal.
double high_band_fraction(const Tensor& x);

// A one-period-scale sinusoid with a handful of isolated spikes.
struct SpikeSignal {
  Tensor x;                          // [1, 1, length]
  std::vector<std::size_t> spikes;  // frame indices, ascending
};
SpikeSignal spike_signal(std::uint64_t seed, std::size_t length = 128, std::size_t n_spikes = 4);

// Share of sum d^2 lying within `radius` half-rate frames of a spike. Frame t
// of the full-rate signal maps to half-rate index t / 2.
double near_spike_energy_fraction(const Tensor& d, std::span<const std::size_t> spike_frames, std::size_t radius = 1);

}  // namespace liftpool::harness
