#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "json.hpp"

#include "emsift/trace.hpp"

namespace emsift {

enum class ActivationModel { kNone, kLeakagePersistent, kLeakageDual, kDosWindows, kDosSet };

// Parameters of the activation mechanism. Only the fields belonging to the
// selected model are consulted.
struct AnomalyParams {
  // leakage_persistent: every trace with index >= trigger_index is activated.
  std::size_t trigger_index = 0;

  // leakage_dual / dos_windows: inclusive [first, last] trace-index windows.
  // leakage_dual requires exactly two disjoint windows.
  std::vector<std::pair<std::size_t, std::size_t>> windows;

  // dos_set: fraction of trace indices (drawn without replacement from a
  // dedicated RNG substream) whose bursts are suppressed. Must be in (0, 1).
  double fraction = 0.0;

  // Leakage tone: amplitude and carrier as a multiple of clock_freq.
  double leak_amp = 0.5;
  double leak_freq_ratio = 1.3;

  // DoS models: burst train of activated traces is scaled by this factor.
  double suppress_factor = 0.0;
};

struct SimConfig {
  std::size_t n_traces = 100;
  std::size_t samples_per_trace = 4096;
  double sampling_rate = 5.0e8;  // Hz
  double clock_freq = 1.0e7;     // Hz
  std::vector<double> harmonic_amps = {1.0, 0.5, 0.25};
  double burst_amp = 1.2;
  double noise_sigma = 0.3;
  double drift_amp = 0.1;
  // Scales the random per-trace harmonic phase: phi_i = phase_jitter * 2pi * u_i.
  // 1 = fully random phase (default), 0 = deterministic traces at zero noise.
  double phase_jitter = 1.0;
  ActivationModel activation_model = ActivationModel::kNone;
  AnomalyParams anomaly;
  std::uint64_t rng_seed = 1;
};

enum class TraceLabel { kNormal, kActivated };

struct LabeledTraceSet {
  TraceSet traces;
  std::vector<TraceLabel> labels;
  SimConfig config_echo;
};

void validate_sim_config(const SimConfig& cfg);

// Ground-truth activation flags for the configured model.
std::vector<TraceLabel> activation_labels(const SimConfig& cfg);

// Deterministic for a given seed; per-trace RNG substreams make the output
// independent of the number of jobs.
LabeledTraceSet simulate(const SimConfig& cfg, int jobs = 1);

// Per-trace CSVs + manifest (trace_io format) + labels.json (ground truth,
// never read by the analysis pipeline). Returns the manifest path.
std::filesystem::path write_trace_set(const LabeledTraceSet& set, const std::filesystem::path& dir);

SimConfig sim_config_from_json(const nlohmann::json& doc);
nlohmann::json sim_config_to_json(const SimConfig& cfg);

const char* activation_model_name(ActivationModel model);

}  // namespace emsift
