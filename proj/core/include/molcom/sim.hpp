#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "molcom/channel.hpp"
#include "molcom/errors.hpp"
#include "molcom/rng.hpp"

namespace molcom {

// Concentration-shift-keying modulation settings.
struct ModulationConfig {
  int alphabet_size = 8;         // C, amplitude levels 0..C-1
  double symbol_rate = 2.0;      // Hz
  double particles_scale = 0.0;  // amplitude of one level unit; <= 0 means auto-calibrate
  double sample_rate = 100.0;    // Hz

  void validate() const;
};

// Disturbances layered on the ideal superposition of pulses.
struct NoiseConfig {
  double awgn_sigma = 0.02;              // additive Gaussian, signal units
  double amplitude_jitter_sigma = 0.05;  // lognormal sigma on per-symbol injection
  double drift_amplitude = 0.05;         // slow sinusoidal baseline
  double drift_period_s = 30.0;
  double sampling_jitter_sigma = 0.001;  // per-sample timestamp jitter, seconds

  void validate(double sample_rate) const;

  static NoiseConfig off() { return NoiseConfig{0.0, 0.0, 0.0, 30.0, 0.0}; }
};

// One transmitted message together with the sensor trace it produced.
struct Transmission {
  std::vector<int> symbols;
  std::vector<double> boundaries_s;  // symbol start times
  std::vector<double> t_s;           // sample times, strictly increasing
  std::vector<double> v;             // sample values
};

// Transmission plus the full configuration echo that generated it.
struct TransmissionRecord {
  ChannelParams channel;
  ModulationConfig modulation;
  NoiseConfig noise;
  std::uint64_t seed = 0;
  Transmission tx;
};

// particles_scale that makes an isolated level-1 pulse peak at 1.0.
double calibrated_particles_scale(const ChannelParams& ch);

// n symbols drawn uniformly from [0, C).
std::vector<int> random_message(std::size_t n, int alphabet_size, Rng& rng);

// Synthesizes the sensor trace for a symbol sequence: superposition of
// hitting-density pulses scaled by level and per-symbol injection jitter,
// plus drift and additive noise, sampled on a jittered uniform grid with a
// two-symbol-period tail.
Transmission modulate(const std::vector<int>& symbols, const ModulationConfig& mod,
                      const ChannelParams& ch, const NoiseConfig& noise, Rng& rng);

// Deterministic corpus: transmission i uses a stream derived from
// (master_seed, i).
std::vector<TransmissionRecord> generate_corpus(std::size_t n_transmissions, std::size_t msg_len,
                                                const ModulationConfig& mod,
                                                const ChannelParams& ch, const NoiseConfig& noise,
                                                std::uint64_t master_seed);

// JSONL persistence: one record per line with fields config / symbols /
// boundaries_s / t_s / v, doubles at full round-trip precision.
void write_transmissions_jsonl(const std::string& path,
                               const std::vector<TransmissionRecord>& records);
std::vector<TransmissionRecord> read_transmissions_jsonl(const std::string& path);

}  // namespace molcom
