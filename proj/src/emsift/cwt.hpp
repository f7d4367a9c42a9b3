#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "emsift/matrix.hpp"
#include "emsift/trace.hpp"

namespace emsift {

// Fraction of samples at each trace end treated as the cone of influence:
// circular FFT convolution wraps energy across the boundary, so ridge checks
// and other pointwise statements exclude this margin.
inline constexpr double kCoiFraction = 0.05;

inline std::size_t coi_margin(std::size_t n_samples) {
  return static_cast<std::size_t>(static_cast<double>(n_samples) * kCoiFraction + 0.999999);
}

struct WaveletConfig {
  double omega0 = 6.0;  // Morlet center frequency (dimensionless)
  int n_scales = 64;
  // Pseudo-frequency band to cover, Hz. Zero means "not set": the pipeline
  // resolves defaults before calling in; the transform itself requires an
  // explicit band with 0 < f_min < f_max <= Nyquist.
  double f_min = 0.0;
  double f_max = 0.0;
};

struct Scalogram {
  Matrix magnitudes;           // [n_scales x n_samples], row k at scales[k]
  std::vector<double> scales;  // seconds, ascending
  std::vector<double> freqs;   // Hz, descending; freqs[k] = omega0 / (2*pi*scales[k])
  std::string trace_id;
};

// n_scales scales whose pseudo-frequencies are log-spaced over [f_min, f_max].
// Returned ascending in scale (descending in frequency); scale = omega0/(2*pi*f).
std::vector<double> scales_for_band(const WaveletConfig& cfg, double sampling_rate);

// Precomputed analytic-Morlet spectra for a fixed (band, sampling rate, trace
// length). transform() is const and allocates its own scratch, so one plan can
// serve a parallel map over traces.
class CwtPlan {
 public:
  CwtPlan(const WaveletConfig& cfg, double sampling_rate, std::size_t n_samples);

  Scalogram transform(const EmTrace& trace) const;

  const std::vector<double>& scales() const { return scales_; }
  const std::vector<double>& freqs() const { return freqs_; }

 private:
  WaveletConfig cfg_;
  double sampling_rate_;
  std::size_t n_samples_;
  std::vector<double> scales_;
  std::vector<double> freqs_;
  // spectra_[k] holds Psi_hat at scale k for bins 0..n/2 (negative bins are
  // zero for the analytic wavelet).
  std::vector<std::vector<double>> spectra_;
};

// Convenience wrapper: builds a plan for this trace and transforms it.
Scalogram cwt_transform(const EmTrace& trace, const WaveletConfig& cfg);

// CSV matrix (rows = scales) plus a "<path>.json" sidecar listing scales and
// pseudo-frequencies.
void write_scalogram_csv(const Scalogram& s, const std::filesystem::path& path);

}  // namespace emsift
