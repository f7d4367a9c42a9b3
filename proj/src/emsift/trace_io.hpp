#pragma once

#include <filesystem>
#include <string>

#include "emsift/trace.hpp"

namespace emsift {

// Reads one trace from CSV. Accepted layouts:
//   time_s,volts   (header required only if the first line is non-numeric)
//   volts          (single column)
// The time column, when present, is ignored for sample values; the sampling
// rate always comes from the manifest. Bad numeric cells raise parse_error
// with the offending line number.
EmTrace load_trace_csv(const std::filesystem::path& path, double sampling_rate);

void write_trace_csv(const EmTrace& trace, const std::filesystem::path& path);

// Manifest layout:
// {
//   "sampling_rate": 5e8,
//   "traces": [ {"file": "trace_0000.csv", "id": "t0", "grid": [row, col]} ],
//   "meta": { "free": "form" }
// }
// "id" defaults to the file stem; "grid" and "meta" are optional. Trace order
// follows the manifest. File paths resolve relative to the manifest location.
TraceSet load_trace_set(const std::filesystem::path& manifest_path);

// Writes trace_NNNN.csv per trace plus manifest.json into dir (created if
// missing). Returns the manifest path.
std::filesystem::path write_trace_set(const TraceSet& set, const std::filesystem::path& dir);

// Row-major CSV; empty cells are written as "nan".
void write_heatmap_csv(const Heatmap& map, const std::filesystem::path& path);

}  // namespace emsift
