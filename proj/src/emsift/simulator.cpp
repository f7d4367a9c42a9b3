#include "emsift/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>

#include "emsift/errors.hpp"
#include "emsift/parallel.hpp"
#include "emsift/rng.hpp"
#include "emsift/trace_io.hpp"

namespace emsift {

namespace {

using nlohmann::json;

constexpr int kRounds = 10;                  // burst positions per trace
constexpr double kBurstFreqRatio = 3.7;      // burst carrier / clock_freq
constexpr double kLeakPhase = 0.7;           // fixed leak tone phase, radians
constexpr double kGolden = 0.6180339887498949;  // round-to-round phase step

// RNG stream id for global draws (dos_set selection); per-trace streams use
// the trace index, which is always < n_traces, so bit 63 cannot collide.
constexpr std::uint64_t kSelectionStream = 0x8000000000000000ULL;

void check_windows(const std::vector<std::pair<std::size_t, std::size_t>>& windows,
                   std::size_t n_traces, std::size_t required) {
  if (windows.empty()) throw config_error("simulator: window list is empty");
  if (required && windows.size() != required)
    throw config_error("simulator: model needs exactly " + std::to_string(required) +
                       " windows, got " + std::to_string(windows.size()));
  auto sorted = windows;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    auto [first, last] = sorted[i];
    if (first > last) throw config_error("simulator: window first index exceeds last");
    if (last >= n_traces) throw config_error("simulator: window index beyond n_traces");
    if (i > 0 && first <= sorted[i - 1].second)
      throw config_error("simulator: windows overlap");
  }
}

// Shared burst train: Gaussian-windowed carrier at each round position. Fully
// deterministic, so suppression can be checked by exact subtraction.
std::vector<double> burst_template(const SimConfig& cfg) {
  const std::size_t n = cfg.samples_per_trace;
  std::vector<double> burst(n, 0.0);
  if (cfg.burst_amp == 0.0) return burst;
  const double fs = cfg.sampling_rate;
  const double f_b = std::min(kBurstFreqRatio * cfg.clock_freq, 0.45 * fs);
  const double sigma = static_cast<double>(n) / 80.0;
  for (int r = 0; r < kRounds; ++r) {
    const double centre = (r + 0.5) * static_cast<double>(n) / kRounds;
    const double psi = 2.0 * std::numbers::pi * kGolden * r;
    const std::size_t lo =
        static_cast<std::size_t>(std::max(0.0, std::floor(centre - 4.0 * sigma)));
    const std::size_t hi =
        std::min<std::size_t>(n, static_cast<std::size_t>(std::ceil(centre + 4.0 * sigma)));
    for (std::size_t i = lo; i < hi; ++i) {
      const double d = (static_cast<double>(i) - centre) / sigma;
      const double t = static_cast<double>(i) / fs;
      burst[i] += cfg.burst_amp * std::exp(-0.5 * d * d) *
                  std::sin(2.0 * std::numbers::pi * f_b * t + psi);
    }
  }
  return burst;
}

std::vector<bool> activation_mask(const SimConfig& cfg) {
  std::vector<bool> active(cfg.n_traces, false);
  switch (cfg.activation_model) {
    case ActivationModel::kNone:
      break;
    case ActivationModel::kLeakagePersistent:
      for (std::size_t i = cfg.anomaly.trigger_index; i < cfg.n_traces; ++i) active[i] = true;
      break;
    case ActivationModel::kLeakageDual:
    case ActivationModel::kDosWindows:
      for (auto [first, last] : cfg.anomaly.windows)
        for (std::size_t i = first; i <= last; ++i) active[i] = true;
      break;
    case ActivationModel::kDosSet: {
      const std::size_t count = static_cast<std::size_t>(
          std::llround(cfg.anomaly.fraction * static_cast<double>(cfg.n_traces)));
      // Partial Fisher-Yates on a dedicated substream keeps the choice stable
      // no matter how many traces are generated or in what order.
      Rng rng = Rng(cfg.rng_seed).fork(kSelectionStream);
      std::vector<std::size_t> indices(cfg.n_traces);
      std::iota(indices.begin(), indices.end(), 0);
      for (std::size_t j = 0; j < count; ++j) {
        std::size_t k = j + rng.uniform_below(cfg.n_traces - j);
        std::swap(indices[j], indices[k]);
      }
      for (std::size_t j = 0; j < count; ++j) active[indices[j]] = true;
      break;
    }
  }
  return active;
}

}  // namespace

void validate_sim_config(const SimConfig& cfg) {
  if (cfg.n_traces < 1) throw config_error("simulator: n_traces must be >= 1");
  if (cfg.samples_per_trace < 64)
    throw config_error("simulator: samples_per_trace must be >= 64");
  if (!(cfg.clock_freq > 0.0) || !(cfg.clock_freq < cfg.sampling_rate / 2.0))
    throw config_error("simulator: need 0 < clock_freq < sampling_rate/2");
  if (!(cfg.noise_sigma >= 0.0)) throw config_error("simulator: noise_sigma must be >= 0");
  if (!(cfg.phase_jitter >= 0.0 && cfg.phase_jitter <= 1.0))
    throw config_error("simulator: phase_jitter must be in [0, 1]");
  for (double a : cfg.harmonic_amps)
    if (!std::isfinite(a)) throw config_error("simulator: harmonic amplitude not finite");

  const AnomalyParams& p = cfg.anomaly;
  switch (cfg.activation_model) {
    case ActivationModel::kNone:
      break;
    case ActivationModel::kLeakagePersistent:
    case ActivationModel::kLeakageDual: {
      if (cfg.activation_model == ActivationModel::kLeakageDual)
        check_windows(p.windows, cfg.n_traces, 2);
      if (!(p.leak_amp > 0.0)) throw config_error("simulator: leak_amp must be > 0");
      if (!(p.leak_freq_ratio * cfg.clock_freq < cfg.sampling_rate / 2.0))
        throw config_error("simulator: leak tone frequency must stay below Nyquist");
      break;
    }
    case ActivationModel::kDosWindows:
      check_windows(p.windows, cfg.n_traces, 0);
      if (!(p.suppress_factor >= 0.0 && p.suppress_factor <= 1.0))
        throw config_error("simulator: suppress_factor must be in [0, 1]");
      break;
    case ActivationModel::kDosSet:
      if (!(p.fraction > 0.0 && p.fraction < 1.0))
        throw config_error("simulator: fraction must be in (0, 1)");
      if (!(p.suppress_factor >= 0.0 && p.suppress_factor <= 1.0))
        throw config_error("simulator: suppress_factor must be in [0, 1]");
      break;
  }
}

std::vector<TraceLabel> activation_labels(const SimConfig& cfg) {
  validate_sim_config(cfg);
  std::vector<bool> mask = activation_mask(cfg);
  std::vector<TraceLabel> labels(cfg.n_traces, TraceLabel::kNormal);
  for (std::size_t i = 0; i < cfg.n_traces; ++i)
    if (mask[i]) labels[i] = TraceLabel::kActivated;
  return labels;
}

LabeledTraceSet simulate(const SimConfig& cfg, int jobs) {
  validate_sim_config(cfg);
  const std::size_t n = cfg.samples_per_trace;
  const double fs = cfg.sampling_rate;
  const std::vector<double> burst = burst_template(cfg);
  const std::vector<bool> active = activation_mask(cfg);
  const bool is_dos = cfg.activation_model == ActivationModel::kDosWindows ||
                      cfg.activation_model == ActivationModel::kDosSet;
  const bool is_leak = cfg.activation_model == ActivationModel::kLeakagePersistent ||
                       cfg.activation_model == ActivationModel::kLeakageDual;
  const double f_leak = cfg.anomaly.leak_freq_ratio * cfg.clock_freq;
  const Rng root(cfg.rng_seed);

  LabeledTraceSet out;
  out.config_echo = cfg;
  out.traces.traces.resize(cfg.n_traces);
  out.labels.assign(cfg.n_traces, TraceLabel::kNormal);
  for (std::size_t i = 0; i < cfg.n_traces; ++i)
    if (active[i]) out.labels[i] = TraceLabel::kActivated;

  parallel_for(cfg.n_traces, jobs, [&](std::size_t i) {
    Rng rng = root.fork(i);
    // The phase draw always happens so the noise stream does not depend on
    // whether phase_jitter is zero.
    const double phi = cfg.phase_jitter * 2.0 * std::numbers::pi * rng.uniform01();

    EmTrace trace;
    trace.sampling_rate = fs;
    char id[32];
    std::snprintf(id, sizeof(id), "sim_%05zu", i);
    trace.trace_id = id;
    trace.samples.assign(n, 0.0);

    const double burst_scale = (is_dos && active[i]) ? cfg.anomaly.suppress_factor : 1.0;
    const double drift_phase =
        2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(cfg.n_traces);
    const bool leak_here = is_leak && active[i];

    for (std::size_t s = 0; s < n; ++s) {
      const double t = static_cast<double>(s) / fs;
      double v = 0.0;
      for (std::size_t h = 0; h < cfg.harmonic_amps.size(); ++h) {
        v += cfg.harmonic_amps[h] *
             std::sin(2.0 * std::numbers::pi * (static_cast<double>(h) + 1.0) *
                          cfg.clock_freq * t +
                      phi);
      }
      v += burst_scale * burst[s];
      if (leak_here)
        v += cfg.anomaly.leak_amp *
             std::sin(2.0 * std::numbers::pi * f_leak * t + kLeakPhase);
      if (cfg.drift_amp != 0.0)
        v += cfg.drift_amp *
             std::sin(std::numbers::pi * static_cast<double>(s) / static_cast<double>(n) +
                      drift_phase);
      if (cfg.noise_sigma > 0.0) v += cfg.noise_sigma * rng.gaussian();
      trace.samples[s] = v;
    }
    out.traces.traces[i] = std::move(trace);
  });
  return out;
}

std::filesystem::path write_trace_set(const LabeledTraceSet& set,
                                      const std::filesystem::path& dir) {
  std::filesystem::path manifest = emsift::write_trace_set(set.traces, dir);
  json labels = json::array();
  for (TraceLabel l : set.labels)
    labels.push_back(l == TraceLabel::kActivated ? "activated" : "normal");
  std::ofstream out(dir / "labels.json");
  if (!out) throw io_error("cannot write labels file in " + dir.string());
  out << labels.dump() << '\n';
  return manifest;
}

const char* activation_model_name(ActivationModel model) {
  switch (model) {
    case ActivationModel::kNone: return "none";
    case ActivationModel::kLeakagePersistent: return "leakage_persistent";
    case ActivationModel::kLeakageDual: return "leakage_dual";
    case ActivationModel::kDosWindows: return "dos_windows";
    case ActivationModel::kDosSet: return "dos_set";
  }
  return "none";
}

SimConfig sim_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw parse_error("sim config: expected a JSON object");
  SimConfig cfg;
  try {
    if (doc.contains("n_traces")) cfg.n_traces = doc["n_traces"].get<std::size_t>();
    if (doc.contains("samples_per_trace"))
      cfg.samples_per_trace = doc["samples_per_trace"].get<std::size_t>();
    if (doc.contains("sampling_rate")) cfg.sampling_rate = doc["sampling_rate"].get<double>();
    if (doc.contains("clock_freq")) cfg.clock_freq = doc["clock_freq"].get<double>();
    if (doc.contains("harmonic_amps"))
      cfg.harmonic_amps = doc["harmonic_amps"].get<std::vector<double>>();
    if (doc.contains("burst_amp")) cfg.burst_amp = doc["burst_amp"].get<double>();
    if (doc.contains("noise_sigma")) cfg.noise_sigma = doc["noise_sigma"].get<double>();
    if (doc.contains("drift_amp")) cfg.drift_amp = doc["drift_amp"].get<double>();
    if (doc.contains("phase_jitter")) cfg.phase_jitter = doc["phase_jitter"].get<double>();
    if (doc.contains("rng_seed")) cfg.rng_seed = doc["rng_seed"].get<std::uint64_t>();
    if (doc.contains("activation_model")) {
      const std::string name = doc["activation_model"].get<std::string>();
      if (name == "none") cfg.activation_model = ActivationModel::kNone;
      else if (name == "leakage_persistent") cfg.activation_model = ActivationModel::kLeakagePersistent;
      else if (name == "leakage_dual") cfg.activation_model = ActivationModel::kLeakageDual;
      else if (name == "dos_windows") cfg.activation_model = ActivationModel::kDosWindows;
      else if (name == "dos_set") cfg.activation_model = ActivationModel::kDosSet;
      else throw parse_error("sim config: unknown activation_model '" + name + "'");
    }
    if (doc.contains("anomaly_params")) {
      const nlohmann::json& a = doc["anomaly_params"];
      if (!a.is_object()) throw parse_error("sim config: anomaly_params must be an object");
      if (a.contains("trigger_index"))
        cfg.anomaly.trigger_index = a["trigger_index"].get<std::size_t>();
      if (a.contains("windows")) {
        cfg.anomaly.windows.clear();
        for (const auto& w : a["windows"]) {
          if (!w.is_array() || w.size() != 2)
            throw parse_error("sim config: each window must be [first, last]");
          cfg.anomaly.windows.emplace_back(w[0].get<std::size_t>(), w[1].get<std::size_t>());
        }
      }
      if (a.contains("fraction")) cfg.anomaly.fraction = a["fraction"].get<double>();
      if (a.contains("leak_amp")) cfg.anomaly.leak_amp = a["leak_amp"].get<double>();
      if (a.contains("leak_freq_ratio"))
        cfg.anomaly.leak_freq_ratio = a["leak_freq_ratio"].get<double>();
      if (a.contains("suppress_factor"))
        cfg.anomaly.suppress_factor = a["suppress_factor"].get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw parse_error(std::string("sim config: ") + e.what());
  }
  validate_sim_config(cfg);
  return cfg;
}

nlohmann::json sim_config_to_json(const SimConfig& cfg) {
  json doc;
  doc["n_traces"] = cfg.n_traces;
  doc["samples_per_trace"] = cfg.samples_per_trace;
  doc["sampling_rate"] = cfg.sampling_rate;
  doc["clock_freq"] = cfg.clock_freq;
  doc["harmonic_amps"] = cfg.harmonic_amps;
  doc["burst_amp"] = cfg.burst_amp;
  doc["noise_sigma"] = cfg.noise_sigma;
  doc["drift_amp"] = cfg.drift_amp;
  doc["phase_jitter"] = cfg.phase_jitter;
  doc["activation_model"] = activation_model_name(cfg.activation_model);
  doc["rng_seed"] = cfg.rng_seed;
  json a = json::object();
  switch (cfg.activation_model) {
    case ActivationModel::kNone:
      break;
    case ActivationModel::kLeakagePersistent:
      a["trigger_index"] = cfg.anomaly.trigger_index;
      a["leak_amp"] = cfg.anomaly.leak_amp;
      a["leak_freq_ratio"] = cfg.anomaly.leak_freq_ratio;
      break;
    case ActivationModel::kLeakageDual: {
      json w = json::array();
      for (auto [first, last] : cfg.anomaly.windows) w.push_back({first, last});
      a["windows"] = std::move(w);
      a["leak_amp"] = cfg.anomaly.leak_amp;
      a["leak_freq_ratio"] = cfg.anomaly.leak_freq_ratio;
      break;
    }
    case ActivationModel::kDosWindows: {
      json w = json::array();
      for (auto [first, last] : cfg.anomaly.windows) w.push_back({first, last});
      a["windows"] = std::move(w);
      a["suppress_factor"] = cfg.anomaly.suppress_factor;
      break;
    }
    case ActivationModel::kDosSet:
      a["fraction"] = cfg.anomaly.fraction;
      a["suppress_factor"] = cfg.anomaly.suppress_factor;
      break;
  }
  doc["anomaly_params"] = std::move(a);
  return doc;
}

}  // namespace emsift
