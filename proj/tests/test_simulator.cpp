#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "json.hpp"

#include "emsift/errors.hpp"
#include "emsift/simulator.hpp"
#include "emsift/trace_io.hpp"

using emsift::ActivationModel;
using emsift::LabeledTraceSet;
using emsift::SimConfig;
using emsift::TraceLabel;

namespace {

SimConfig small_config() {
  SimConfig cfg;
  cfg.n_traces = 24;
  cfg.samples_per_trace = 256;
  cfg.rng_seed = 77;
  return cfg;
}

SimConfig quiet_config() {
  // No per-trace randomness: noise, drift and phase jitter all zero.
  SimConfig cfg = small_config();
  cfg.noise_sigma = 0.0;
  cfg.drift_amp = 0.0;
  cfg.phase_jitter = 0.0;
  return cfg;
}

std::size_t count_activated(const std::vector<TraceLabel>& labels) {
  return std::count(labels.begin(), labels.end(), TraceLabel::kActivated);
}

}  // namespace

TEST_CASE("simulator: output is deterministic and independent of jobs") {
  SimConfig cfg = small_config();
  LabeledTraceSet a = emsift::simulate(cfg, 1);
  LabeledTraceSet b = emsift::simulate(cfg, 1);
  LabeledTraceSet c = emsift::simulate(cfg, 4);
  REQUIRE(a.traces.traces.size() == cfg.n_traces);
  for (std::size_t i = 0; i < cfg.n_traces; ++i) {
    CHECK(a.traces.traces[i].samples == b.traces.traces[i].samples);
    CHECK(a.traces.traces[i].samples == c.traces.traces[i].samples);
  }
}

TEST_CASE("simulator: different seeds change the traces") {
  SimConfig cfg = small_config();
  LabeledTraceSet a = emsift::simulate(cfg);
  cfg.rng_seed = 78;
  LabeledTraceSet b = emsift::simulate(cfg);
  CHECK(a.traces.traces[0].samples != b.traces.traces[0].samples);
}

TEST_CASE("simulator: activation labels per model") {
  SimConfig cfg = small_config();
  cfg.n_traces = 1000;

  SUBCASE("none activates nothing") {
    CHECK(count_activated(emsift::activation_labels(cfg)) == 0);
  }
  SUBCASE("leakage_persistent activates every index at or past the trigger") {
    cfg.activation_model = ActivationModel::kLeakagePersistent;
    cfg.anomaly.trigger_index = 500;
    auto labels = emsift::activation_labels(cfg);
    CHECK(count_activated(labels) == 500);
    CHECK(labels[499] == TraceLabel::kNormal);
    CHECK(labels[500] == TraceLabel::kActivated);
    CHECK(labels[999] == TraceLabel::kActivated);
  }
  SUBCASE("leakage_dual activates exactly the two windows") {
    cfg.activation_model = ActivationModel::kLeakageDual;
    cfg.anomaly.windows = {{10, 20}, {40, 50}};
    auto labels = emsift::activation_labels(cfg);
    CHECK(count_activated(labels) == 22);
    CHECK(labels[10] == TraceLabel::kActivated);
    CHECK(labels[20] == TraceLabel::kActivated);
    CHECK(labels[21] == TraceLabel::kNormal);
  }
  SUBCASE("dos_windows covers the multi-window schedule") {
    cfg.activation_model = ActivationModel::kDosWindows;
    cfg.anomaly.windows = {{7, 7}, {100, 120}, {300, 320}, {500, 520},
                           {700, 720}, {900, 920}};
    CHECK(count_activated(emsift::activation_labels(cfg)) == 106);
  }
  SUBCASE("dos_set draws a stable fraction without replacement") {
    cfg.activation_model = ActivationModel::kDosSet;
    cfg.anomaly.fraction = 0.25;
    auto labels = emsift::activation_labels(cfg);
    CHECK(count_activated(labels) == 250);
    CHECK(labels == emsift::activation_labels(cfg));  // stable for a seed
  }
}

TEST_CASE("simulator: activated-minus-normal difference is exactly the leak tone") {
  SimConfig base = quiet_config();
  SimConfig leaking = base;
  leaking.activation_model = ActivationModel::kLeakagePersistent;
  leaking.anomaly.trigger_index = 0;  // every trace leaks
  leaking.anomaly.leak_amp = 0.5;
  leaking.anomaly.leak_freq_ratio = 1.3;

  LabeledTraceSet a = emsift::simulate(base);
  LabeledTraceSet b = emsift::simulate(leaking);
  const double f_leak = 1.3 * base.clock_freq;
  for (std::size_t s = 0; s < base.samples_per_trace; ++s) {
    double t = static_cast<double>(s) / base.sampling_rate;
    double expected = 0.5 * std::sin(2.0 * std::numbers::pi * f_leak * t + 0.7);
    double got = b.traces.traces[3].samples[s] - a.traces.traces[3].samples[s];
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("simulator: suppression scales only the burst train") {
  SimConfig none = quiet_config();
  SimConfig full = none, half = none, off = none;
  for (SimConfig* cfg : {&full, &half, &off}) {
    cfg->activation_model = ActivationModel::kDosWindows;
    cfg->anomaly.windows = {{0, 23}};  // every trace suppressed
  }
  full.anomaly.suppress_factor = 1.0;
  half.anomaly.suppress_factor = 0.5;
  off.anomaly.suppress_factor = 0.0;

  auto t_none = emsift::simulate(none).traces.traces[5].samples;
  auto t_full = emsift::simulate(full).traces.traces[5].samples;
  auto t_half = emsift::simulate(half).traces.traces[5].samples;
  auto t_off = emsift::simulate(off).traces.traces[5].samples;

  // Factor 1 reproduces the unsuppressed trace through the same arithmetic.
  CHECK(t_none == t_full);
  for (std::size_t s = 0; s < t_none.size(); ++s) {
    double burst = t_none[s] - t_off[s];
    CHECK(t_none[s] - t_half[s] == doctest::Approx(0.5 * burst).epsilon(1e-12));
  }
}

TEST_CASE("simulator: zero noise, drift and jitter collapse all traces to one shape") {
  LabeledTraceSet set = emsift::simulate(quiet_config());
  for (std::size_t i = 1; i < set.traces.traces.size(); ++i)
    CHECK(set.traces.traces[i].samples == set.traces.traces[0].samples);
}

TEST_CASE("simulator: phase jitter decorrelates traces") {
  SimConfig cfg = quiet_config();
  cfg.phase_jitter = 1.0;
  LabeledTraceSet set = emsift::simulate(cfg);
  CHECK(set.traces.traces[0].samples != set.traces.traces[1].samples);
}

TEST_CASE("simulator: invalid configurations are rejected") {
  SimConfig cfg = small_config();
  SUBCASE("too few samples") {
    cfg.samples_per_trace = 32;
    CHECK_THROWS_AS(emsift::simulate(cfg), emsift::config_error);
  }
  SUBCASE("clock at or above Nyquist") {
    cfg.clock_freq = cfg.sampling_rate / 2.0;
    CHECK_THROWS_AS(emsift::simulate(cfg), emsift::config_error);
  }
  SUBCASE("dual leakage needs exactly two windows") {
    cfg.activation_model = ActivationModel::kLeakageDual;
    cfg.anomaly.windows = {{1, 3}};
    CHECK_THROWS_AS(emsift::simulate(cfg), emsift::config_error);
  }
  SUBCASE("overlapping windows") {
    cfg.activation_model = ActivationModel::kDosWindows;
    cfg.anomaly.windows = {{1, 5}, {5, 9}};
    CHECK_THROWS_AS(emsift::simulate(cfg), emsift::config_error);
  }
  SUBCASE("window beyond the trace count") {
    cfg.activation_model = ActivationModel::kDosWindows;
    cfg.anomaly.windows = {{20, 24}};
    CHECK_THROWS_AS(emsift::simulate(cfg), emsift::config_error);
  }
  SUBCASE("fraction outside (0, 1)") {
    cfg.activation_model = ActivationModel::kDosSet;
    cfg.anomaly.fraction = 0.0;
    CHECK_THROWS_AS(emsift::simulate(cfg), emsift::config_error);
  }
  SUBCASE("suppress factor outside [0, 1]") {
    cfg.activation_model = ActivationModel::kDosSet;
    cfg.anomaly.fraction = 0.5;
    cfg.anomaly.suppress_factor = 1.5;
    CHECK_THROWS_AS(emsift::simulate(cfg), emsift::config_error);
  }
  SUBCASE("leak tone above Nyquist") {
    cfg.activation_model = ActivationModel::kLeakagePersistent;
    cfg.clock_freq = 2.0e8;  // fs 5e8, ratio 1.3 -> 2.6e8 > 2.5e8
    CHECK_THROWS_AS(emsift::simulate(cfg), emsift::config_error);
  }
}

TEST_CASE("simulator: config survives a JSON round trip") {
  SimConfig cfg = small_config();
  cfg.activation_model = ActivationModel::kDosWindows;
  cfg.anomaly.windows = {{7, 7}, {10, 12}};
  cfg.anomaly.suppress_factor = 0.4;
  cfg.harmonic_amps = {1.0, 0.3};
  cfg.noise_sigma = 0.17;
  cfg.phase_jitter = 0.5;

  SimConfig back = emsift::sim_config_from_json(emsift::sim_config_to_json(cfg));
  CHECK(back.n_traces == cfg.n_traces);
  CHECK(back.samples_per_trace == cfg.samples_per_trace);
  CHECK(back.sampling_rate == cfg.sampling_rate);
  CHECK(back.clock_freq == cfg.clock_freq);
  CHECK(back.harmonic_amps == cfg.harmonic_amps);
  CHECK(back.burst_amp == cfg.burst_amp);
  CHECK(back.noise_sigma == cfg.noise_sigma);
  CHECK(back.drift_amp == cfg.drift_amp);
  CHECK(back.phase_jitter == cfg.phase_jitter);
  CHECK(back.activation_model == cfg.activation_model);
  CHECK(back.anomaly.windows == cfg.anomaly.windows);
  CHECK(back.anomaly.suppress_factor == cfg.anomaly.suppress_factor);
  CHECK(back.rng_seed == cfg.rng_seed);
}

TEST_CASE("simulator: written sets include ground-truth labels") {
  auto dir = std::filesystem::temp_directory_path() / "emsift_test_sim_write";
  std::filesystem::remove_all(dir);

  SimConfig cfg = small_config();
  cfg.activation_model = ActivationModel::kLeakagePersistent;
  cfg.anomaly.trigger_index = 18;
  LabeledTraceSet set = emsift::simulate(cfg);
  auto manifest = emsift::write_trace_set(set, dir);

  emsift::TraceSet loaded = emsift::load_trace_set(manifest);
  CHECK(loaded.traces.size() == cfg.n_traces);

  std::ifstream in(dir / "labels.json");
  REQUIRE(in.good());
  nlohmann::json labels = nlohmann::json::parse(in);
  REQUIRE(labels.size() == cfg.n_traces);
  CHECK(std::count(labels.begin(), labels.end(), "activated") == 6);
  CHECK(labels[17] == "normal");
  CHECK(labels[18] == "activated");
}
