#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace emsift {

struct GridPos {
  int row = 0;
  int col = 0;
};

// One captured (or synthesized) waveform on a fixed uniform time grid.
struct EmTrace {
  std::vector<double> samples;
  double sampling_rate = 0.0;  // samples per second
  std::string trace_id;
  std::optional<GridPos> grid_pos;
};

struct TraceSet {
  std::vector<EmTrace> traces;
  std::map<std::string, std::string> meta;  // free-form manifest metadata
};

enum class NormalizeMode { kZscore, kUnitEnergy };

// Throws config_error / analysis_error when a trace is unusable:
// empty, non-finite samples, or non-positive sampling rate.
void validate_trace(const EmTrace& trace);

// Additionally requires every trace to share length and sampling rate.
void validate_trace_set(const TraceSet& set);

// kZscore: subtract mean, divide by the sample (N-1) standard deviation.
// kUnitEnergy: subtract mean, scale to unit L2 norm.
// A constant trace has no scale to normalize by and raises analysis_error.
EmTrace normalize_trace(const EmTrace& trace, NormalizeMode mode);

// Brick-wall band-pass: keeps FFT bins with f_lo <= |f| <= f_hi, zeroes the
// rest, inverse-transforms. Requires 0 <= f_lo < f_hi <= Nyquist.
EmTrace bandlimit(const EmTrace& trace, double f_lo_hz, double f_hi_hz);

double peak_to_peak(const EmTrace& trace);

// Spatial map of mean peak-to-peak amplitude. Cells with no traces hold NaN.
struct Heatmap {
  int rows = 0;
  int cols = 0;
  std::vector<double> cells;  // row-major

  double at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
};

// Averages peak_to_peak over the traces positioned in each cell. Traces
// without a grid position are skipped; positions outside the grid are errors.
Heatmap assemble_heatmap(const TraceSet& set, int rows, int cols);

}  // namespace emsift
