#include "emsift/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "json.hpp"

#include "emsift/errors.hpp"

namespace emsift {

namespace {

using nlohmann::json;

// Locale-independent strict double parse of a whole CSV cell.
bool parse_double(std::string_view cell, double& out) {
  // Trim spaces and a possible trailing CR from Windows line endings.
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
  while (!cell.empty() &&
         (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
    cell.remove_suffix(1);
  if (cell.empty()) return false;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::vector<std::string_view> split_cells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      cells.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return cells;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

EmTrace load_trace_csv(const std::filesystem::path& path, double sampling_rate) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open trace file: " + path.string());

  EmTrace trace;
  trace.sampling_rate = sampling_rate;
  trace.trace_id = path.stem().string();

  std::string line;
  std::size_t line_no = 0;
  bool first_data_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split_cells(line);
    if (cells.size() > 2)
      throw parse_error(path.string() + ":" + std::to_string(line_no) +
                        ": expected 1 or 2 columns, got " + std::to_string(cells.size()));
    double value = 0.0;
    std::string_view volts_cell = cells.back();
    if (!parse_double(volts_cell, value)) {
      // A non-numeric first line is a header; anywhere else it is an error.
      if (first_data_line) {
        first_data_line = false;
        continue;
      }
      throw parse_error(path.string() + ":" + std::to_string(line_no) +
                        ": bad numeric cell '" + std::string(volts_cell) + "'");
    }
    if (cells.size() == 2) {
      double t = 0.0;
      if (!parse_double(cells[0], t))
        throw parse_error(path.string() + ":" + std::to_string(line_no) +
                          ": bad numeric cell '" + std::string(cells[0]) + "'");
    }
    first_data_line = false;
    trace.samples.push_back(value);
  }
  if (trace.samples.empty())
    throw parse_error(path.string() + ": no samples found");
  return trace;
}

void write_trace_csv(const EmTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write trace file: " + path.string());
  out << "time_s,volts\n";
  const double dt = 1.0 / trace.sampling_rate;
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    out << format_double(static_cast<double>(i) * dt) << ','
        << format_double(trace.samples[i]) << '\n';
  }
  if (!out) throw io_error("failed while writing: " + path.string());
}

TraceSet load_trace_set(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw io_error("cannot open manifest: " + manifest_path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw parse_error("manifest " + manifest_path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("sampling_rate") || !doc.contains("traces"))
    throw parse_error("manifest " + manifest_path.string() +
                      ": need object with sampling_rate and traces");
  if (!doc["sampling_rate"].is_number())
    throw parse_error("manifest: sampling_rate must be a number");
  const double rate = doc["sampling_rate"].get<double>();
  if (!(rate > 0.0)) throw parse_error("manifest: sampling_rate must be positive");
  if (!doc["traces"].is_array() || doc["traces"].empty())
    throw parse_error("manifest: traces must be a non-empty array");

  TraceSet set;
  const std::filesystem::path base = manifest_path.parent_path();
  for (const json& entry : doc["traces"]) {
    if (!entry.is_object() || !entry.contains("file") || !entry["file"].is_string())
      throw parse_error("manifest: each trace entry needs a \"file\" string");
    std::filesystem::path file = base / entry["file"].get<std::string>();
    EmTrace trace = load_trace_csv(file, rate);
    if (entry.contains("id")) {
      if (!entry["id"].is_string()) throw parse_error("manifest: trace id must be a string");
      trace.trace_id = entry["id"].get<std::string>();
    }
    if (entry.contains("grid")) {
      const json& g = entry["grid"];
      if (!g.is_array() || g.size() != 2 || !g[0].is_number_integer() ||
          !g[1].is_number_integer())
        throw parse_error("manifest: grid must be [row, col] integers");
      trace.grid_pos = GridPos{g[0].get<int>(), g[1].get<int>()};
    }
    set.traces.push_back(std::move(trace));
  }
  if (doc.contains("meta")) {
    if (!doc["meta"].is_object()) throw parse_error("manifest: meta must be an object");
    for (auto& [key, value] : doc["meta"].items()) {
      set.meta[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }
  return set;
}

std::filesystem::path write_trace_set(const TraceSet& set, const std::filesystem::path& dir) {
  validate_trace_set(set);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw io_error("cannot create directory: " + dir.string());

  json manifest;
  manifest["sampling_rate"] = set.traces.front().sampling_rate;
  manifest["traces"] = json::array();
  for (std::size_t i = 0; i < set.traces.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "trace_%04zu.csv", i);
    write_trace_csv(set.traces[i], dir / name);
    json entry;
    entry["file"] = name;
    entry["id"] = set.traces[i].trace_id;
    if (set.traces[i].grid_pos)
      entry["grid"] = {set.traces[i].grid_pos->row, set.traces[i].grid_pos->col};
    manifest["traces"].push_back(std::move(entry));
  }
  if (!set.meta.empty()) {
    json meta = json::object();
    for (const auto& [key, value] : set.meta) meta[key] = value;
    manifest["meta"] = std::move(meta);
  }

  std::filesystem::path manifest_path = dir / "manifest.json";
  std::ofstream out(manifest_path);
  if (!out) throw io_error("cannot write manifest: " + manifest_path.string());
  out << manifest.dump(2) << '\n';
  return manifest_path;
}

void write_heatmap_csv(const Heatmap& map, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write heatmap: " + path.string());
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      if (c) out << ',';
      double v = map.at(r, c);
      out << (std::isnan(v) ? std::string("nan") : format_double(v));
    }
    out << '\n';
  }
}

}  // namespace emsift
