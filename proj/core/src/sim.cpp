#include "molcom/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace molcom {

using nlohmann::json;

void ModulationConfig::validate() const {
  if (alphabet_size < 2) throw std::domain_error("modulation: alphabet size must be >= 2");
  if (!(symbol_rate > 0.0)) throw std::domain_error("modulation: symbol rate must be positive");
  if (!(sample_rate >= 8.0 * symbol_rate))
    throw std::domain_error("modulation: sample rate must be at least 8x the symbol rate");
}

void NoiseConfig::validate(double sample_rate) const {
  if (awgn_sigma < 0.0 || amplitude_jitter_sigma < 0.0 || drift_amplitude < 0.0 ||
      sampling_jitter_sigma < 0.0)
    throw std::domain_error("noise: all fields must be nonnegative");
  if (drift_amplitude > 0.0 && !(drift_period_s > 0.0))
    throw std::domain_error("noise: drift period must be positive");
  if (!(sampling_jitter_sigma < 0.25 / sample_rate))
    throw std::domain_error("noise: sampling jitter must stay below a quarter sample period");
}

double calibrated_particles_scale(const ChannelParams& ch) {
  return 1.0 / hitting_density(ch, hitting_peak_time(ch));
}

std::vector<int> random_message(std::size_t n, int alphabet_size, Rng& rng) {
  if (n < 1) throw std::invalid_argument("random_message: need at least one symbol");
  if (alphabet_size < 2) throw std::domain_error("random_message: alphabet size must be >= 2");
  std::vector<int> symbols(n);
  for (auto& s : symbols)
    s = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(alphabet_size)));
  return symbols;
}

Transmission modulate(const std::vector<int>& symbols, const ModulationConfig& mod,
                      const ChannelParams& ch, const NoiseConfig& noise, Rng& rng) {
  mod.validate();
  ch.validate();
  noise.validate(mod.sample_rate);
  if (symbols.empty()) throw std::invalid_argument("modulate: empty symbol sequence");
  for (int s : symbols)
    if (s < 0 || s >= mod.alphabet_size)
      throw std::domain_error("modulate: symbol outside [0, C)");

  const double scale =
      mod.particles_scale > 0.0 ? mod.particles_scale : calibrated_particles_scale(ch);
  const double period = 1.0 / mod.symbol_rate;
  const std::size_t n_sym = symbols.size();

  Transmission tx;
  tx.symbols = symbols;
  tx.boundaries_s.resize(n_sym);
  for (std::size_t i = 0; i < n_sym; ++i) tx.boundaries_s[i] = static_cast<double>(i) * period;

  // Per-symbol injection jitter factors are drawn first so the sample loop
  // consumes the stream in a fixed order.
  std::vector<double> pulse_amp(n_sym);
  for (std::size_t i = 0; i < n_sym; ++i) {
    const double jitter = noise.amplitude_jitter_sigma > 0.0
                              ? rng.lognormal_factor(noise.amplitude_jitter_sigma)
                              : 1.0;
    pulse_amp[i] = static_cast<double>(symbols[i]) * scale * jitter;
  }

  const double duration = (static_cast<double>(n_sym) + 2.0) * period;
  const std::size_t n_samples = static_cast<std::size_t>(std::floor(duration * mod.sample_rate)) + 1;

  tx.t_s.resize(n_samples);
  tx.v.resize(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    double t = static_cast<double>(i) / mod.sample_rate;
    if (noise.sampling_jitter_sigma > 0.0) t += rng.normal(0.0, noise.sampling_jitter_sigma);
    tx.t_s[i] = t;
  }
  std::sort(tx.t_s.begin(), tx.t_s.end());
  for (std::size_t i = 1; i < n_samples; ++i)
    if (!(tx.t_s[i] > tx.t_s[i - 1]))
      tx.t_s[i] = std::nextafter(tx.t_s[i - 1], std::numeric_limits<double>::infinity());

  for (std::size_t i = 0; i < n_samples; ++i) {
    const double t = tx.t_s[i];
    double value = 0.0;
    for (std::size_t s = 0; s < n_sym; ++s) {
      const double dt = t - tx.boundaries_s[s];
      if (dt <= 0.0) break;  // later symbols have not started yet
      if (pulse_amp[s] != 0.0) value += pulse_amp[s] * hitting_density(ch, dt);
    }
    if (noise.drift_amplitude > 0.0)
      value += noise.drift_amplitude * std::sin(2.0 * M_PI * t / noise.drift_period_s);
    if (noise.awgn_sigma > 0.0) value += rng.normal(0.0, noise.awgn_sigma);
    tx.v[i] = value;
  }
  return tx;
}

std::vector<TransmissionRecord> generate_corpus(std::size_t n_transmissions, std::size_t msg_len,
                                                const ModulationConfig& mod,
                                                const ChannelParams& ch, const NoiseConfig& noise,
                                                std::uint64_t master_seed) {
  if (n_transmissions < 1) throw std::invalid_argument("generate_corpus: need n >= 1");
  ModulationConfig resolved = mod;
  if (resolved.particles_scale <= 0.0) resolved.particles_scale = calibrated_particles_scale(ch);

  std::vector<TransmissionRecord> out;
  out.reserve(n_transmissions);
  for (std::size_t i = 0; i < n_transmissions; ++i) {
    Rng rng = Rng::derive(master_seed, i);
    TransmissionRecord rec;
    rec.channel = ch;
    rec.modulation = resolved;
    rec.noise = noise;
    rec.seed = master_seed;
    rec.tx = modulate(random_message(msg_len, resolved.alphabet_size, rng), resolved, ch, noise, rng);
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

json config_to_json(const TransmissionRecord& rec) {
  return json{
      {"channel",
       {{"r", rec.channel.receiver_radius},
        {"d", rec.channel.distance},
        {"D", rec.channel.diffusion_coeff}}},
      {"modulation",
       {{"alphabet_size", rec.modulation.alphabet_size},
        {"symbol_rate", rec.modulation.symbol_rate},
        {"particles_scale", rec.modulation.particles_scale},
        {"sample_rate", rec.modulation.sample_rate}}},
      {"noise",
       {{"awgn_sigma", rec.noise.awgn_sigma},
        {"amplitude_jitter_sigma", rec.noise.amplitude_jitter_sigma},
        {"drift_amplitude", rec.noise.drift_amplitude},
        {"drift_period_s", rec.noise.drift_period_s},
        {"sampling_jitter_sigma", rec.noise.sampling_jitter_sigma}}},
      {"seed", rec.seed}};
}

void config_from_json(const json& j, TransmissionRecord& rec) {
  const json& ch = j.at("channel");
  rec.channel.receiver_radius = ch.at("r").get<double>();
  rec.channel.distance = ch.at("d").get<double>();
  rec.channel.diffusion_coeff = ch.at("D").get<double>();
  const json& m = j.at("modulation");
  rec.modulation.alphabet_size = m.at("alphabet_size").get<int>();
  rec.modulation.symbol_rate = m.at("symbol_rate").get<double>();
  rec.modulation.particles_scale = m.at("particles_scale").get<double>();
  rec.modulation.sample_rate = m.at("sample_rate").get<double>();
  const json& n = j.at("noise");
  rec.noise.awgn_sigma = n.at("awgn_sigma").get<double>();
  rec.noise.amplitude_jitter_sigma = n.at("amplitude_jitter_sigma").get<double>();
  rec.noise.drift_amplitude = n.at("drift_amplitude").get<double>();
  rec.noise.drift_period_s = n.at("drift_period_s").get<double>();
  rec.noise.sampling_jitter_sigma = n.at("sampling_jitter_sigma").get<double>();
  rec.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace

void write_transmissions_jsonl(const std::string& path,
                               const std::vector<TransmissionRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (const auto& rec : records) {
    json line{{"config", config_to_json(rec)},
              {"symbols", rec.tx.symbols},
              {"boundaries_s", rec.tx.boundaries_s},
              {"t_s", rec.tx.t_s},
              {"v", rec.tx.v}};
    out << line.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

std::vector<TransmissionRecord> read_transmissions_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::vector<TransmissionRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    try {
      TransmissionRecord rec;
      config_from_json(j.at("config"), rec);
      rec.tx.symbols = j.at("symbols").get<std::vector<int>>();
      rec.tx.boundaries_s = j.at("boundaries_s").get<std::vector<double>>();
      rec.tx.t_s = j.at("t_s").get<std::vector<double>>();
      rec.tx.v = j.at("v").get<std::vector<double>>();
      if (rec.tx.symbols.size() != rec.tx.boundaries_s.size() ||
          rec.tx.t_s.size() != rec.tx.v.size())
        throw DataError(path + ":" + std::to_string(lineno) + ": inconsistent array lengths");
      records.push_back(std::move(rec));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": missing field: " + e.what());
    }
  }
  if (records.empty()) throw DataError(path + ": no records");
  return records;
}

}  // namespace molcom
