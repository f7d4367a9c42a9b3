#include "emsift/trace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "emsift/errors.hpp"
#include "emsift/fft.hpp"

namespace emsift {

void validate_trace(const EmTrace& trace) {
  if (trace.samples.empty()) throw config_error("trace '" + trace.trace_id + "' has no samples");
  if (!(trace.sampling_rate > 0.0))
    throw config_error("trace '" + trace.trace_id + "' has non-positive sampling rate");
  for (double v : trace.samples) {
    if (!std::isfinite(v))
      throw analysis_error("trace '" + trace.trace_id + "' contains non-finite samples");
  }
}

void validate_trace_set(const TraceSet& set) {
  if (set.traces.empty()) throw config_error("trace set is empty");
  const std::size_t len = set.traces.front().samples.size();
  const double rate = set.traces.front().sampling_rate;
  for (const EmTrace& t : set.traces) {
    validate_trace(t);
    if (t.samples.size() != len)
      throw config_error("trace '" + t.trace_id + "' length differs from the rest of the set");
    if (t.sampling_rate != rate)
      throw config_error("trace '" + t.trace_id + "' sampling rate differs from the rest of the set");
  }
}

EmTrace normalize_trace(const EmTrace& trace, NormalizeMode mode) {
  validate_trace(trace);
  const std::size_t n = trace.samples.size();
  double mean = 0.0;
  for (double v : trace.samples) mean += v;
  mean /= static_cast<double>(n);

  EmTrace out = trace;
  for (double& v : out.samples) v -= mean;

  double scale = 0.0;
  if (mode == NormalizeMode::kZscore) {
    if (n < 2) throw analysis_error("zscore needs at least 2 samples");
    double ss = 0.0;
    for (double v : out.samples) ss += v * v;
    scale = std::sqrt(ss / static_cast<double>(n - 1));
  } else {
    double ss = 0.0;
    for (double v : out.samples) ss += v * v;
    scale = std::sqrt(ss);
  }
  if (!(scale > 0.0))
    throw analysis_error("trace '" + trace.trace_id + "' is constant; cannot normalize");
  for (double& v : out.samples) v /= scale;
  return out;
}

EmTrace bandlimit(const EmTrace& trace, double f_lo_hz, double f_hi_hz) {
  validate_trace(trace);
  const double nyquist = trace.sampling_rate / 2.0;
  if (!(f_lo_hz >= 0.0) || !(f_lo_hz < f_hi_hz) || !(f_hi_hz <= nyquist))
    throw config_error("bandlimit: need 0 <= f_lo < f_hi <= Nyquist");

  const std::size_t n = trace.samples.size();
  std::vector<cdouble> spectrum = fft_real(trace.samples);
  for (std::size_t k = 0; k < n; ++k) {
    double f = std::abs(fft_bin_freq(k, n, trace.sampling_rate));
    if (f < f_lo_hz || f > f_hi_hz) spectrum[k] = cdouble(0.0, 0.0);
  }
  fft_inplace(spectrum, true);

  EmTrace out = trace;
  for (std::size_t i = 0; i < n; ++i) out.samples[i] = spectrum[i].real();
  return out;
}

double peak_to_peak(const EmTrace& trace) {
  validate_trace(trace);
  auto [lo, hi] = std::minmax_element(trace.samples.begin(), trace.samples.end());
  return *hi - *lo;
}

Heatmap assemble_heatmap(const TraceSet& set, int rows, int cols) {
  if (rows <= 0 || cols <= 0) throw config_error("heatmap dimensions must be positive");
  Heatmap map;
  map.rows = rows;
  map.cols = cols;
  map.cells.assign(static_cast<std::size_t>(rows) * cols,
                   std::numeric_limits<double>::quiet_NaN());
  std::vector<double> sums(map.cells.size(), 0.0);
  std::vector<std::size_t> counts(map.cells.size(), 0);

  for (const EmTrace& t : set.traces) {
    if (!t.grid_pos) continue;
    const GridPos& g = *t.grid_pos;
    if (g.row < 0 || g.row >= rows || g.col < 0 || g.col >= cols)
      throw config_error("trace '" + t.trace_id + "' grid position is outside the heatmap");
    std::size_t idx = static_cast<std::size_t>(g.row) * cols + g.col;
    sums[idx] += peak_to_peak(t);
    counts[idx] += 1;
  }
  for (std::size_t i = 0; i < map.cells.size(); ++i) {
    if (counts[i] > 0) map.cells[i] = sums[i] / static_cast<double>(counts[i]);
  }
  return map;
}

}  // namespace emsift
