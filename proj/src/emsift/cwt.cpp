#include "emsift/cwt.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"

#include "emsift/errors.hpp"
#include "emsift/fft.hpp"

namespace emsift {

namespace {

void validate_wavelet_config(const WaveletConfig& cfg) {
  if (!(cfg.omega0 >= 5.0))
    throw config_error("wavelet: omega0 must be >= 5 for the analytic approximation");
  if (cfg.n_scales < 2) throw config_error("wavelet: n_scales must be >= 2");
}

}  // namespace

std::vector<double> scales_for_band(const WaveletConfig& cfg, double sampling_rate) {
  validate_wavelet_config(cfg);
  const double nyquist = sampling_rate / 2.0;
  if (!(cfg.f_min > 0.0) || !(cfg.f_min < cfg.f_max) || !(cfg.f_max <= nyquist))
    throw config_error("wavelet: need 0 < f_min < f_max <= Nyquist");

  // Pseudo-frequencies log-spaced from f_max down to f_min, so scales ascend.
  std::vector<double> scales(cfg.n_scales);
  const double log_hi = std::log(cfg.f_max);
  const double log_lo = std::log(cfg.f_min);
  for (int k = 0; k < cfg.n_scales; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(cfg.n_scales - 1);
    const double f = std::exp(log_hi + (log_lo - log_hi) * frac);
    scales[k] = cfg.omega0 / (2.0 * std::numbers::pi * f);
  }
  return scales;
}

CwtPlan::CwtPlan(const WaveletConfig& cfg, double sampling_rate, std::size_t n_samples)
    : cfg_(cfg), sampling_rate_(sampling_rate), n_samples_(n_samples) {
  if (n_samples < 64) throw config_error("cwt: trace length must be >= 64");
  scales_ = scales_for_band(cfg, sampling_rate);
  freqs_.resize(scales_.size());
  for (std::size_t k = 0; k < scales_.size(); ++k)
    freqs_[k] = cfg.omega0 / (2.0 * std::numbers::pi * scales_[k]);

  // Psi_hat_s(f) = pi^(-1/4) * sqrt(2 s fs) * exp(-(2 pi f s - omega0)^2 / 2)
  // for f >= 0, zero for f < 0. Only bins 0..n/2 carry positive frequency.
  const double norm_base = std::pow(std::numbers::pi, -0.25);
  spectra_.resize(scales_.size());
  for (std::size_t k = 0; k < scales_.size(); ++k) {
    const double s = scales_[k];
    if (!(s > 0.0)) throw config_error("cwt: degenerate scale");
    std::vector<double>& spec = spectra_[k];
    spec.resize(n_samples / 2 + 1);
    const double amp = norm_base * std::sqrt(2.0 * s * sampling_rate);
    for (std::size_t bin = 0; bin <= n_samples / 2; ++bin) {
      const double f = fft_bin_freq(bin, n_samples, sampling_rate);
      const double arg = 2.0 * std::numbers::pi * f * s - cfg.omega0;
      spec[bin] = amp * std::exp(-0.5 * arg * arg);
    }
  }
}

Scalogram CwtPlan::transform(const EmTrace& trace) const {
  validate_trace(trace);
  if (trace.samples.size() != n_samples_)
    throw config_error("cwt: trace length does not match plan");
  if (trace.sampling_rate != sampling_rate_)
    throw config_error("cwt: trace sampling rate does not match plan");

  const std::size_t n = n_samples_;
  const std::vector<cdouble> spectrum = fft_real(trace.samples);

  Scalogram out;
  out.trace_id = trace.trace_id;
  out.scales = scales_;
  out.freqs = freqs_;
  out.magnitudes = Matrix(scales_.size(), n);

  std::vector<cdouble> buf(n);
  for (std::size_t k = 0; k < scales_.size(); ++k) {
    const std::vector<double>& spec = spectra_[k];
    for (std::size_t bin = 0; bin <= n / 2; ++bin) buf[bin] = spectrum[bin] * spec[bin];
    for (std::size_t bin = n / 2 + 1; bin < n; ++bin) buf[bin] = cdouble(0.0, 0.0);
    fft_inplace(buf, true);
    double* row = out.magnitudes.row(k);
    for (std::size_t i = 0; i < n; ++i) row[i] = std::abs(buf[i]);
  }
  return out;
}

Scalogram cwt_transform(const EmTrace& trace, const WaveletConfig& cfg) {
  CwtPlan plan(cfg, trace.sampling_rate, trace.samples.size());
  return plan.transform(trace);
}

void write_scalogram_csv(const Scalogram& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write scalogram: " + path.string());
  out.precision(9);
  for (std::size_t r = 0; r < s.magnitudes.rows; ++r) {
    const double* row = s.magnitudes.row(r);
    for (std::size_t c = 0; c < s.magnitudes.cols; ++c) {
      if (c) out << ',';
      out << row[c];
    }
    out << '\n';
  }

  nlohmann::json side;
  side["trace_id"] = s.trace_id;
  side["scales"] = s.scales;
  side["freqs"] = s.freqs;
  side["n_samples"] = s.magnitudes.cols;
  std::filesystem::path side_path = path;
  side_path += ".json";
  std::ofstream meta(side_path);
  if (!meta) throw io_error("cannot write scalogram sidecar: " + side_path.string());
  meta << side.dump(2) << '\n';
}

}  // namespace emsift
