#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "molcom/sim.hpp"

namespace molcom {

// Uniformly sampled signal, reconstructed from jittered sensor timestamps.
struct UniformSeries {
  double start_time = 0.0;
  double sample_rate = 0.0;  // Hz
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double time_at(std::size_t i) const { return start_time + static_cast<double>(i) / sample_rate; }
};

// Receiver front-end constants. The defaults are the tested configuration;
// the smoothing width is the only value the pipeline inherits from the
// published setup, the rest are calibrated choices.
struct PreprocessConfig {
  int smooth_width = 10;
  double slope_threshold = 0.3;        // fraction of the max smoothed slope
  double min_separation_fraction = 0.8;  // of one symbol period
  int segment_len = 128;
  double train_fraction = 0.70;
  double val_fraction = 0.15;
};

enum class SegmentationMode { kSlope, kOracle };

struct Segment {
  std::size_t start_index = 0;
  std::vector<double> values;
};

struct SegmentationResult {
  std::vector<Segment> segments;
  bool fallback_grid = false;  // slope mode found no onsets; grid anchored at start
};

// Labeled fixed-length symbol windows with a stratified split.
struct SegmentDataset {
  int segment_len = 128;
  int alphabet_size = 0;
  std::vector<float> X;        // n x segment_len, row-major, values in [0, 1]
  std::vector<std::uint8_t> y;  // n labels
  std::vector<std::uint32_t> train_idx, val_idx, test_idx;
  std::string provenance;  // JSON echo of the generating configuration

  std::size_t size() const { return y.size(); }
  const float* row(std::size_t i) const { return X.data() + i * static_cast<std::size_t>(segment_len); }
};

// Linear interpolation onto a uniform grid spanning [first, last] input time.
UniformSeries resample_uniform(const std::vector<double>& times, const std::vector<double>& values,
                               double target_rate);
UniformSeries resample_uniform(const Transmission& tx, double target_rate);

// Centered moving average with shrinking windows at the edges.
UniformSeries smooth(const UniformSeries& series, int width = 10);

// Min-max scaling to [0, 1]; a constant series maps to all zeros.
UniformSeries normalize(const UniformSeries& series);

// Splits the series into exactly n_symbols windows of one nominal symbol
// period. Slope mode detects pulse onsets from the smoothed first
// difference and projects the nominal grid over silent symbols; oracle mode
// places windows at the true boundaries.
SegmentationResult segment(const UniformSeries& series, double symbol_rate, std::size_t n_symbols,
                           SegmentationMode mode, const PreprocessConfig& cfg = {},
                           const std::vector<double>* oracle_boundaries = nullptr);

// Linear interpolation of a window to exactly L samples, endpoints kept.
std::vector<double> resize_segment(const std::vector<double>& values, int target_len = 128);

// Full pipeline over a corpus: resample, smooth, normalize, segment, resize,
// then a stratified 70/15/15 split.
SegmentDataset build_dataset(const std::vector<TransmissionRecord>& records, SegmentationMode mode,
                             std::uint64_t split_seed, const PreprocessConfig& cfg = {});

// On-disk layout: header.json + data.f32 (little-endian floats, row-major)
// + labels.u8.
void save_dataset(const std::string& dir, const SegmentDataset& ds);
SegmentDataset load_dataset(const std::string& dir);

}  // namespace molcom
