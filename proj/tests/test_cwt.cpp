#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "json.hpp"

#include "emsift/cwt.hpp"
#include "emsift/errors.hpp"
#include "emsift/rng.hpp"

using emsift::CwtPlan;
using emsift::EmTrace;
using emsift::Scalogram;
using emsift::WaveletConfig;

namespace {

constexpr double kFs = 500.0e6;

EmTrace tone(double freq, double amp, std::size_t n, double phase = 0.0) {
  EmTrace t;
  t.sampling_rate = kFs;
  t.trace_id = "tone";
  t.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    t.samples[i] =
        amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / kFs + phase);
  return t;
}

WaveletConfig band_config(int n_scales, double f_min, double f_max) {
  WaveletConfig cfg;
  cfg.n_scales = n_scales;
  cfg.f_min = f_min;
  cfg.f_max = f_max;
  return cfg;
}

}  // namespace

TEST_CASE("cwt: scale grid is log-spaced over the band, ascending in scale") {
  WaveletConfig cfg = band_config(16, 2.0e6, 2.0e8);
  std::vector<double> scales = emsift::scales_for_band(cfg, kFs);
  REQUIRE(scales.size() == 16);

  // Endpoints hit the band edges exactly: scale = omega0 / (2 pi f).
  CHECK(scales.front() ==
        doctest::Approx(6.0 / (2.0 * std::numbers::pi * 2.0e8)).epsilon(1e-12));
  CHECK(scales.back() ==
        doctest::Approx(6.0 / (2.0 * std::numbers::pi * 2.0e6)).epsilon(1e-12));

  double ratio = scales[1] / scales[0];
  for (std::size_t i = 1; i < scales.size(); ++i) {
    CHECK(scales[i] > scales[i - 1]);
    CHECK(scales[i] / scales[i - 1] == doctest::Approx(ratio).epsilon(1e-10));
  }
}

TEST_CASE("cwt: pseudo-frequencies pair with scales and descend") {
  CwtPlan plan(band_config(8, 1.0e6, 1.0e8), kFs, 256);
  REQUIRE(plan.freqs().size() == 8);
  for (std::size_t k = 0; k < 8; ++k)
    CHECK(plan.freqs()[k] ==
          doctest::Approx(6.0 / (2.0 * std::numbers::pi * plan.scales()[k])).epsilon(1e-12));
  CHECK(std::is_sorted(plan.freqs().rbegin(), plan.freqs().rend()));
}

TEST_CASE("cwt: magnitudes scale homogeneously with the input") {
  emsift::Rng rng(21);
  EmTrace x;
  x.sampling_rate = kFs;
  x.trace_id = "noise";
  x.samples.resize(300);
  for (double& s : x.samples) s = rng.gaussian();
  EmTrace x3 = x;
  for (double& s : x3.samples) s *= 3.0;

  CwtPlan plan(band_config(12, 2.0e6, 2.0e8), kFs, 300);
  Scalogram a = plan.transform(x);
  Scalogram b = plan.transform(x3);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.magnitudes.data.size(); ++i)
    worst = std::max(worst, std::abs(b.magnitudes.data[i] - 3.0 * a.magnitudes.data[i]));
  CHECK(worst < 1e-10);
}

TEST_CASE("cwt: circular time shifts move the scalogram columns exactly") {
  emsift::Rng rng(22);
  const std::size_t n = 240;
  EmTrace x;
  x.sampling_rate = kFs;
  x.trace_id = "x";
  x.samples.resize(n);
  for (double& s : x.samples) s = rng.gaussian();

  const std::size_t shift = 17;
  EmTrace y = x;
  for (std::size_t i = 0; i < n; ++i) y.samples[(i + shift) % n] = x.samples[i];

  CwtPlan plan(band_config(10, 2.0e6, 2.0e8), kFs, n);
  Scalogram a = plan.transform(x);
  Scalogram b = plan.transform(y);
  double worst = 0.0;
  for (std::size_t k = 0; k < a.scales.size(); ++k)
    for (std::size_t i = 0; i < n; ++i)
      worst = std::max(worst, std::abs(b.magnitudes.at(k, (i + shift) % n) -
                                       a.magnitudes.at(k, i)));
  CHECK(worst < 1e-10);
}

TEST_CASE("cwt: pure-tone ridge sits at the nearest frequency bin everywhere inside the cone") {
  // 4000 samples exercises the non-power-of-two FFT path; 10 MHz is exactly
  // 80 cycles, so the circular boundary is seamless.
  const std::size_t n = 4000;
  const double f0 = 10.0e6;
  EmTrace t = tone(f0, 1.0, n);
  CwtPlan plan(band_config(64, 1.25e6, 2.25e8), kFs, n);
  Scalogram s = plan.transform(t);

  // Nearest bin in log-frequency distance.
  std::size_t expected = 0;
  double best = 1e300;
  for (std::size_t k = 0; k < s.freqs.size(); ++k) {
    double d = std::abs(std::log(s.freqs[k] / f0));
    if (d < best) {
      best = d;
      expected = k;
    }
  }

  const std::size_t margin = emsift::coi_margin(n);
  for (std::size_t i = margin; i < n - margin; ++i) {
    std::size_t argmax = 0;
    for (std::size_t k = 1; k < s.scales.size(); ++k)
      if (s.magnitudes.at(k, i) > s.magnitudes.at(argmax, i)) argmax = k;
    REQUIRE(std::abs(static_cast<long>(argmax) - static_cast<long>(expected)) <= 1);
  }
}

TEST_CASE("cwt: matched-scale tone magnitude equals the closed form") {
  // At the matched scale (2 pi f s = omega0) the wavelet spectrum weight is
  // pi^(-1/4) sqrt(2 s fs), and a unit-amplitude tone contributes X/2 there.
  const std::size_t n = 4000;
  const double f0 = 10.0e6;
  WaveletConfig cfg = band_config(2, f0 * (1.0 - 1e-9), f0 * (1.0 + 1e-9));
  CwtPlan plan(cfg, kFs, n);
  Scalogram s = plan.transform(tone(f0, 1.0, n));

  const double scale = 6.0 / (2.0 * std::numbers::pi * f0);
  const double expected = 0.5 * std::pow(std::numbers::pi, -0.25) * std::sqrt(2.0 * scale * kFs);
  const std::size_t mid = n / 2;
  CHECK(s.magnitudes.at(0, mid) == doctest::Approx(expected).epsilon(1e-6));
  CHECK(s.magnitudes.at(1, mid) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("cwt: zero trace maps to a zero scalogram") {
  EmTrace t;
  t.sampling_rate = kFs;
  t.trace_id = "zero";
  t.samples.assign(128, 0.0);
  Scalogram s = emsift::cwt_transform(t, band_config(6, 2.0e6, 2.0e8));
  for (double v : s.magnitudes.data) CHECK(v == 0.0);
}

TEST_CASE("cwt: invalid configurations and mismatched traces are rejected") {
  CHECK_THROWS_AS(CwtPlan(band_config(6, 0.0, 2.0e8), kFs, 128), emsift::config_error);
  CHECK_THROWS_AS(CwtPlan(band_config(6, 2.0e8, 2.0e6), kFs, 128), emsift::config_error);
  CHECK_THROWS_AS(CwtPlan(band_config(6, 2.0e6, 2.6e8), kFs, 128), emsift::config_error);
  CHECK_THROWS_AS(CwtPlan(band_config(1, 2.0e6, 2.0e8), kFs, 128), emsift::config_error);
  CHECK_THROWS_AS(CwtPlan(band_config(6, 2.0e6, 2.0e8), kFs, 32), emsift::config_error);

  WaveletConfig low_omega = band_config(6, 2.0e6, 2.0e8);
  low_omega.omega0 = 4.0;
  CHECK_THROWS_AS(CwtPlan(low_omega, kFs, 128), emsift::config_error);

  CwtPlan plan(band_config(6, 2.0e6, 2.0e8), kFs, 128);
  CHECK_THROWS_AS(plan.transform(tone(1.0e7, 1.0, 100)), emsift::config_error);
  EmTrace wrong_rate = tone(1.0e7, 1.0, 128);
  wrong_rate.sampling_rate = 4.0e8;
  CHECK_THROWS_AS(plan.transform(wrong_rate), emsift::config_error);
}

TEST_CASE("cwt: scalogram CSV export writes the matrix and a sidecar") {
  auto dir = std::filesystem::temp_directory_path() / "emsift_test_cwt";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);

  Scalogram s = emsift::cwt_transform(tone(1.0e7, 1.0, 128), band_config(4, 2.0e6, 2.0e8));
  auto path = dir / "scalogram.csv";
  emsift::write_scalogram_csv(s, path);

  std::ifstream csv(path);
  REQUIRE(csv.good());
  std::string line;
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 4);

  std::ifstream side(dir / "scalogram.csv.json");
  REQUIRE(side.good());
  nlohmann::json meta = nlohmann::json::parse(side);
  CHECK(meta["trace_id"] == "tone");
  CHECK(meta["scales"].size() == 4);
  CHECK(meta["freqs"].size() == 4);
  CHECK(meta["n_samples"] == 128);
}
