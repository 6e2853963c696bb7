#include "molcom/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace molcom {

using nlohmann::json;

UniformSeries resample_uniform(const std::vector<double>& times, const std::vector<double>& values,
                               double target_rate) {
  if (times.size() != values.size())
    throw std::invalid_argument("resample_uniform: times/values length mismatch");
  if (times.size() < 2) throw std::invalid_argument("resample_uniform: need at least 2 samples");
  if (!(target_rate > 0.0)) throw std::invalid_argument("resample_uniform: rate must be positive");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("resample_uniform: times must be strictly increasing");

  const double first = times.front(), last = times.back();
  const std::size_t count =
      static_cast<std::size_t>(std::floor((last - first) * target_rate + 1e-9)) + 1;

  UniformSeries out;
  out.start_time = first;
  out.sample_rate = target_rate;
  out.values.resize(count);

  std::size_t j = 0;  // left bracket of the current output time
  for (std::size_t i = 0; i < count; ++i) {
    const double t = std::min(first + static_cast<double>(i) / target_rate, last);
    while (j + 2 < times.size() && times[j + 1] <= t) ++j;
    const double span = times[j + 1] - times[j];
    const double u = (t - times[j]) / span;
    out.values[i] = values[j] + u * (values[j + 1] - values[j]);
  }
  return out;
}

UniformSeries resample_uniform(const Transmission& tx, double target_rate) {
  return resample_uniform(tx.t_s, tx.v, target_rate);
}

UniformSeries smooth(const UniformSeries& series, int width) {
  if (series.values.empty()) throw std::invalid_argument("smooth: empty series");
  if (width < 1) throw std::invalid_argument("smooth: width must be >= 1");
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(series.values.size());
  const std::ptrdiff_t left = (width - 1) / 2;
  const std::ptrdiff_t right = width - 1 - left;

  std::vector<double> prefix(n + 1, 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + series.values[i];

  UniformSeries out = series;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - left);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, i + right);
    out.values[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
  }
  return out;
}

UniformSeries normalize(const UniformSeries& series) {
  if (series.values.empty()) throw std::invalid_argument("normalize: empty series");
  const auto [mn_it, mx_it] = std::minmax_element(series.values.begin(), series.values.end());
  const double mn = *mn_it, mx = *mx_it;
  UniformSeries out = series;
  if (mx == mn) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
  }
  const double inv = 1.0 / (mx - mn);
  for (auto& v : out.values) v = (v - mn) * inv;
  return out;
}

namespace {

std::size_t clamp_start(std::ptrdiff_t start, std::size_t n, std::size_t seg_len) {
  const std::ptrdiff_t max_start = static_cast<std::ptrdiff_t>(n - seg_len);
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(start, 0, max_start));
}

}  // namespace

SegmentationResult segment(const UniformSeries& series, double symbol_rate, std::size_t n_symbols,
                           SegmentationMode mode, const PreprocessConfig& cfg,
                           const std::vector<double>* oracle_boundaries) {
  if (n_symbols == 0) throw std::invalid_argument("segment: need at least one symbol");
  if (!(symbol_rate > 0.0)) throw std::invalid_argument("segment: symbol rate must be positive");
  const double period_samples = series.sample_rate / symbol_rate;
  const std::size_t seg_len = static_cast<std::size_t>(std::llround(period_samples));
  const std::size_t n = series.size();
  if (seg_len < 2 || n < static_cast<std::size_t>(std::llround(period_samples * static_cast<double>(n_symbols))))
    throw std::invalid_argument("segment: series shorter than the symbol sequence");

  SegmentationResult result;
  result.segments.resize(n_symbols);

  std::vector<std::ptrdiff_t> starts(n_symbols, -1);

  if (mode == SegmentationMode::kOracle) {
    if (oracle_boundaries == nullptr || oracle_boundaries->size() != n_symbols)
      throw std::invalid_argument("segment: oracle mode needs one boundary per symbol");
    for (std::size_t k = 0; k < n_symbols; ++k)
      starts[k] = std::llround(((*oracle_boundaries)[k] - series.start_time) * series.sample_rate);
  } else {
    // Upward crossings of the smoothed first difference mark pulse onsets.
    UniformSeries diff = series;
    diff.values.resize(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) diff.values[i] = series.values[i + 1] - series.values[i];
    const UniformSeries sd = smooth(diff, cfg.smooth_width);

    const double max_slope = *std::max_element(sd.values.begin(), sd.values.end());
    std::vector<std::size_t> onsets;
    if (max_slope > 0.0) {
      const double thr = cfg.slope_threshold * max_slope;
      const double min_sep = cfg.min_separation_fraction * period_samples;
      double last_kept = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < sd.values.size(); ++i) {
        const bool crossing = sd.values[i] >= thr && (i == 0 || sd.values[i - 1] < thr);
        if (crossing && static_cast<double>(i) - last_kept >= min_sep) {
          onsets.push_back(i);
          last_kept = static_cast<double>(i);
        }
      }
    }

    if (onsets.empty()) {
      // All-silent transmission: fall back to the nominal grid.
      result.fallback_grid = true;
      for (std::size_t k = 0; k < n_symbols; ++k)
        starts[k] = std::llround(static_cast<double>(k) * period_samples);
    } else {
      // Assign detected onsets to symbol slots, then estimate the common
      // grid offset and project it over the undetected (silent) slots.
      std::vector<double> residuals;
      for (std::size_t onset : onsets) {
        const auto slot = static_cast<std::ptrdiff_t>(
            std::llround(static_cast<double>(onset) / period_samples));
        const std::size_t k = static_cast<std::size_t>(
            std::clamp<std::ptrdiff_t>(slot, 0, static_cast<std::ptrdiff_t>(n_symbols) - 1));
        if (starts[k] < 0) {
          starts[k] = static_cast<std::ptrdiff_t>(onset);
          residuals.push_back(static_cast<double>(onset) -
                              static_cast<double>(k) * period_samples);
        }
      }
      std::sort(residuals.begin(), residuals.end());
      const double offset = residuals[residuals.size() / 2];
      for (std::size_t k = 0; k < n_symbols; ++k)
        if (starts[k] < 0)
          starts[k] = std::llround(static_cast<double>(k) * period_samples + offset);
    }
  }

  for (std::size_t k = 0; k < n_symbols; ++k) {
    const std::size_t s = clamp_start(starts[k], n, seg_len);
    result.segments[k].start_index = s;
    result.segments[k].values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(s),
                                     series.values.begin() + static_cast<std::ptrdiff_t>(s + seg_len));
  }
  return result;
}

std::vector<double> resize_segment(const std::vector<double>& values, int target_len) {
  if (values.size() < 2) throw std::invalid_argument("resize_segment: need at least 2 samples");
  if (target_len < 2) throw std::invalid_argument("resize_segment: target length must be >= 2");
  const std::size_t n = values.size();
  std::vector<double> out(static_cast<std::size_t>(target_len));
  const double scale = static_cast<double>(n - 1) / static_cast<double>(target_len - 1);
  for (int i = 0; i < target_len; ++i) {
    const double pos = static_cast<double>(i) * scale;
    std::size_t j = static_cast<std::size_t>(pos);
    if (j >= n - 1) j = n - 2;
    const double u = pos - static_cast<double>(j);
    out[static_cast<std::size_t>(i)] = values[j] + u * (values[j + 1] - values[j]);
  }
  out.front() = values.front();
  out.back() = values.back();
  return out;
}

namespace {

// Largest-remainder apportionment of `target` slots over class counts.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& counts, std::size_t target) {
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  const std::size_t c = counts.size();
  std::vector<std::size_t> out(c, 0);
  std::vector<std::pair<double, std::size_t>> fractional;  // (-frac, class)
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < c; ++i) {
    const double quota = total > 0.0 ? static_cast<double>(counts[i]) * static_cast<double>(target) / total : 0.0;
    out[i] = std::min(counts[i], static_cast<std::size_t>(std::floor(quota)));
    assigned += out[i];
    fractional.emplace_back(-(quota - std::floor(quota)), i);
  }
  std::sort(fractional.begin(), fractional.end());
  for (std::size_t r = 0; assigned < target && r < fractional.size(); ++r) {
    const std::size_t i = fractional[r].second;
    if (out[i] < counts[i]) {
      ++out[i];
      ++assigned;
    }
  }
  // If rounding starved the target (capped classes), top up greedily.
  for (std::size_t i = 0; assigned < target && i < c; ++i) {
    while (out[i] < counts[i] && assigned < target) {
      ++out[i];
      ++assigned;
    }
  }
  return out;
}

}  // namespace

SegmentDataset build_dataset(const std::vector<TransmissionRecord>& records, SegmentationMode mode,
                             std::uint64_t split_seed, const PreprocessConfig& cfg) {
  if (records.empty()) throw std::invalid_argument("build_dataset: empty corpus");
  const ModulationConfig& mod0 = records.front().modulation;
  for (const auto& rec : records) {
    if (rec.modulation.alphabet_size != mod0.alphabet_size ||
        rec.modulation.symbol_rate != mod0.symbol_rate ||
        rec.modulation.sample_rate != mod0.sample_rate)
      throw DataError("build_dataset: mixed modulation configs in corpus");
  }

  SegmentDataset ds;
  ds.segment_len = cfg.segment_len;
  ds.alphabet_size = mod0.alphabet_size;

  for (const auto& rec : records) {
    const UniformSeries uniform = resample_uniform(rec.tx, mod0.sample_rate);
    const UniformSeries smoothed = smooth(uniform, cfg.smooth_width);
    const UniformSeries normalized = normalize(smoothed);
    const SegmentationResult seg =
        segment(normalized, mod0.symbol_rate, rec.tx.symbols.size(), mode, cfg,
                mode == SegmentationMode::kOracle ? &rec.tx.boundaries_s : nullptr);
    for (std::size_t k = 0; k < seg.segments.size(); ++k) {
      const std::vector<double> row = resize_segment(seg.segments[k].values, cfg.segment_len);
      for (double v : row) ds.X.push_back(static_cast<float>(v));
      ds.y.push_back(static_cast<std::uint8_t>(rec.tx.symbols[k]));
    }
  }

  const std::size_t n = ds.y.size();
  const int c = ds.alphabet_size;

  // Stratified split: per-class shuffles, then largest-remainder
  // apportionment so each split's class histogram stays within one sample
  // of its proportional share.
  Rng rng(split_seed);
  std::vector<std::vector<std::uint32_t>> by_class(static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < n; ++i) by_class[ds.y[i]].push_back(static_cast<std::uint32_t>(i));
  for (auto& idxs : by_class)
    for (std::size_t i = idxs.size(); i > 1; --i)
      std::swap(idxs[i - 1], idxs[rng.uniform_int(i)]);

  std::vector<std::size_t> counts(static_cast<std::size_t>(c));
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] = by_class[i].size();

  const std::size_t n_train = static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(n)));
  const std::size_t n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(n)));

  const std::vector<std::size_t> train_counts = apportion(counts, n_train);
  std::vector<std::size_t> rest(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) rest[i] = counts[i] - train_counts[i];
  const std::vector<std::size_t> val_counts = apportion(rest, n_val);

  for (std::size_t cls = 0; cls < counts.size(); ++cls) {
    const auto& idxs = by_class[cls];
    std::size_t pos = 0;
    for (std::size_t k = 0; k < train_counts[cls]; ++k) ds.train_idx.push_back(idxs[pos++]);
    for (std::size_t k = 0; k < val_counts[cls]; ++k) ds.val_idx.push_back(idxs[pos++]);
    while (pos < idxs.size()) ds.test_idx.push_back(idxs[pos++]);
  }

  // Size-preserving swaps restore any class a split ended up without.
  std::array<std::vector<std::uint32_t>*, 3> splits{&ds.train_idx, &ds.val_idx, &ds.test_idx};
  auto class_count = [&](const std::vector<std::uint32_t>& split, std::size_t cls) {
    return static_cast<std::size_t>(
        std::count_if(split.begin(), split.end(), [&](std::uint32_t i) { return ds.y[i] == cls; }));
  };
  for (std::size_t cls = 0; cls < counts.size(); ++cls) {
    if (counts[cls] < 3) continue;
    for (auto* needy : splits) {
      if (class_count(*needy, cls) > 0) continue;
      for (auto* donor : splits) {
        if (donor == needy || class_count(*donor, cls) < 2) continue;
        auto give = std::find_if(donor->begin(), donor->end(),
                                 [&](std::uint32_t i) { return ds.y[i] == cls; });
        auto take = std::find_if(needy->begin(), needy->end(), [&](std::uint32_t i) {
          return ds.y[i] != cls && class_count(*needy, ds.y[i]) >= 2;
        });
        if (give != donor->end() && take != needy->end()) {
          std::swap(*give, *take);
          break;
        }
      }
    }
  }

  std::sort(ds.train_idx.begin(), ds.train_idx.end());
  std::sort(ds.val_idx.begin(), ds.val_idx.end());
  std::sort(ds.test_idx.begin(), ds.test_idx.end());

  json prov{{"n_transmissions", records.size()},
            {"msg_len", records.front().tx.symbols.size()},
            {"mode", mode == SegmentationMode::kOracle ? "oracle" : "slope"},
            {"split_seed", split_seed},
            {"smooth_width", cfg.smooth_width},
            {"slope_threshold", cfg.slope_threshold},
            {"channel",
             {{"r", records.front().channel.receiver_radius},
              {"d", records.front().channel.distance},
              {"D", records.front().channel.diffusion_coeff}}},
            {"modulation",
             {{"alphabet_size", mod0.alphabet_size},
              {"symbol_rate", mod0.symbol_rate},
              {"particles_scale", mod0.particles_scale},
              {"sample_rate", mod0.sample_rate}}},
            {"seed", records.front().seed}};
  ds.provenance = prov.dump();
  return ds;
}

void save_dataset(const std::string& dir, const SegmentDataset& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  json header{{"n", ds.size()},
              {"len", ds.segment_len},
              {"alphabet", ds.alphabet_size},
              {"split", {{"train", ds.train_idx}, {"val", ds.val_idx}, {"test", ds.test_idx}}},
              {"provenance", ds.provenance.empty() ? json::object() : json::parse(ds.provenance)}};
  std::ofstream hdr(fs::path(dir) / "header.json", std::ios::binary);
  if (!hdr) throw DataError("cannot write header.json in " + dir);
  hdr << header.dump(2) << '\n';

  std::ofstream data(fs::path(dir) / "data.f32", std::ios::binary);
  if (!data) throw DataError("cannot write data.f32 in " + dir);
  data.write(reinterpret_cast<const char*>(ds.X.data()),
             static_cast<std::streamsize>(ds.X.size() * sizeof(float)));

  std::ofstream labels(fs::path(dir) / "labels.u8", std::ios::binary);
  if (!labels) throw DataError("cannot write labels.u8 in " + dir);
  labels.write(reinterpret_cast<const char*>(ds.y.data()),
               static_cast<std::streamsize>(ds.y.size()));
}

SegmentDataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream hdr(fs::path(dir) / "header.json", std::ios::binary);
  if (!hdr) throw DataError("cannot open header.json in " + dir);
  json header;
  try {
    hdr >> header;
  } catch (const json::exception& e) {
    throw DataError(dir + "/header.json: bad JSON: " + e.what());
  }

  SegmentDataset ds;
  try {
    const std::size_t n = header.at("n").get<std::size_t>();
    ds.segment_len = header.at("len").get<int>();
    ds.alphabet_size = header.at("alphabet").get<int>();
    ds.train_idx = header.at("split").at("train").get<std::vector<std::uint32_t>>();
    ds.val_idx = header.at("split").at("val").get<std::vector<std::uint32_t>>();
    ds.test_idx = header.at("split").at("test").get<std::vector<std::uint32_t>>();
    if (header.contains("provenance")) ds.provenance = header.at("provenance").dump();

    ds.X.resize(n * static_cast<std::size_t>(ds.segment_len));
    ds.y.resize(n);
  } catch (const json::exception& e) {
    throw DataError(dir + "/header.json: missing field: " + e.what());
  }

  std::ifstream data(fs::path(dir) / "data.f32", std::ios::binary);
  if (!data) throw DataError("cannot open data.f32 in " + dir);
  data.read(reinterpret_cast<char*>(ds.X.data()),
            static_cast<std::streamsize>(ds.X.size() * sizeof(float)));
  if (static_cast<std::size_t>(data.gcount()) != ds.X.size() * sizeof(float))
    throw DataError(dir + "/data.f32: truncated");

  std::ifstream labels(fs::path(dir) / "labels.u8", std::ios::binary);
  if (!labels) throw DataError("cannot open labels.u8 in " + dir);
  labels.read(reinterpret_cast<char*>(ds.y.data()), static_cast<std::streamsize>(ds.y.size()));
  if (static_cast<std::size_t>(labels.gcount()) != ds.y.size())
    throw DataError(dir + "/labels.u8: truncated");

  const std::size_t total = ds.train_idx.size() + ds.val_idx.size() + ds.test_idx.size();
  if (total != ds.size()) throw DataError(dir + ": split does not partition the dataset");
  return ds;
}

}  // namespace molcom
