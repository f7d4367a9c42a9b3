// Command-line front end for the emsift detection library. All analysis work
// goes through the C API in emsift.h; this file only handles argument
// parsing, file plumbing and exit codes.
//
// Exit codes: 0 success; 1 usage, I/O or configuration error; 2 analysis
// failure; 4 suspect classification under --fail-on-suspect.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "emsift.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitAnalysis = 2;
constexpr int kExitSuspect = 4;

int exit_code_for(emsift_status status) {
  return status == EMSIFT_ANALYSIS_ERROR ? kExitAnalysis : kExitUsage;
}

int fail(const std::string& context, emsift_status status) {
  std::cerr << "emsift: " << context << ": " << emsift_last_error() << "\n";
  return exit_code_for(status);
}

bool read_file(const std::string& path, std::string* out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream buf;
  buf << in.rdbuf();
  *out = buf.str();
  return true;
}

// RAII wrappers over the C handles so early returns cannot leak.
struct TraceSetGuard {
  emsift_trace_set* ptr = nullptr;
  ~TraceSetGuard() { emsift_trace_set_free(ptr); }
};
struct ReportGuard {
  emsift_report* ptr = nullptr;
  ~ReportGuard() { emsift_report_free(ptr); }
};
struct SweepGuard {
  emsift_sweep* ptr = nullptr;
  ~SweepGuard() { emsift_sweep_free(ptr); }
};
struct StringGuard {
  char* ptr = nullptr;
  ~StringGuard() { emsift_string_free(ptr); }
};

struct CommonArgs {
  int jobs = 0;             // 0: keep the config value
  std::uint64_t seed = 0;
  bool seed_set = false;
};

// Shared --jobs/--seed plumbing; --seed reseeds every random stage of the
// subcommand (simulation noise, or extractor weights + mixture restarts).
void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--jobs", args->jobs, "Cap the number of worker threads")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", args->seed, "Override every RNG seed in the run")
      ->each([args](const std::string&) { args->seed_set = true; });
}

int load_traces(const std::string& manifest, TraceSetGuard* ts) {
  emsift_status st = emsift_trace_set_load(manifest.c_str(), &ts->ptr);
  if (st != EMSIFT_OK) return fail("loading " + manifest, st);
  return kExitOk;
}

int run_simulate(const std::string& config_path, const std::string& out_dir, bool force,
                 const CommonArgs& common) {
  std::string config_text;
  if (!read_file(config_path, &config_text)) {
    std::cerr << "emsift: cannot read config " << config_path << "\n";
    return kExitUsage;
  }
  std::error_code ec;
  if (!force && std::filesystem::is_directory(out_dir, ec) &&
      !std::filesystem::is_empty(out_dir, ec)) {
    std::cerr << "emsift: output directory '" << out_dir
              << "' is not empty (pass --force to write into it)\n";
    return kExitUsage;
  }
  TraceSetGuard ts;
  emsift_status st = emsift_trace_set_simulate(config_text.c_str(), common.seed_set,
                                               common.seed, common.jobs, &ts.ptr);
  if (st != EMSIFT_OK) return fail("simulate", st);
  StringGuard manifest;
  st = emsift_trace_set_save(ts.ptr, out_dir.c_str(), &manifest.ptr);
  if (st != EMSIFT_OK) return fail("writing " + out_dir, st);
  std::cout << manifest.ptr << "\n";
  return kExitOk;
}

emsift_analyze_options make_options(const CommonArgs& common,
                                    const std::string& scalograms_dir,
                                    const std::string& descriptors_csv) {
  emsift_analyze_options opts{};
  opts.jobs = common.jobs;
  opts.use_seed = common.seed_set ? 1 : 0;
  opts.seed = common.seed;
  opts.scalograms_dir = scalograms_dir.empty() ? nullptr : scalograms_dir.c_str();
  opts.descriptors_csv = descriptors_csv.empty() ? nullptr : descriptors_csv.c_str();
  opts.dataset_name = nullptr;
  return opts;
}

int run_analyze(const std::string& manifest, const std::string& config_path,
                const std::string& report_path, const std::string& scalograms_dir,
                const std::string& descriptors_csv, bool fail_on_suspect,
                const CommonArgs& common) {
  std::string config_text;
  if (!read_file(config_path, &config_text)) {
    std::cerr << "emsift: cannot read config " << config_path << "\n";
    return kExitUsage;
  }
  TraceSetGuard ts;
  if (int rc = load_traces(manifest, &ts); rc != kExitOk) return rc;

  emsift_analyze_options opts = make_options(common, scalograms_dir, descriptors_csv);
  ReportGuard report;
  emsift_status st = emsift_analyze(ts.ptr, config_text.c_str(), &opts, &report.ptr);
  if (st != EMSIFT_OK) return fail("analyze", st);

  st = emsift_report_save(report.ptr, report_path.c_str());
  if (st != EMSIFT_OK) return fail("writing " + report_path, st);

  StringGuard line;
  st = emsift_report_summary(report.ptr, &line.ptr);
  if (st != EMSIFT_OK) return fail("analyze", st);
  std::cout << line.ptr << "\n";

  if (fail_on_suspect &&
      emsift_report_classification(report.ptr) != EMSIFT_NOT_SUSPICIOUS)
    return kExitSuspect;
  return kExitOk;
}

bool parse_thresholds(const std::string& text, std::vector<double>* out) {
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    char* end = nullptr;
    double value = std::strtod(token.c_str(), &end);
    if (token.empty() || end != token.c_str() + token.size()) return false;
    out->push_back(value);
  }
  return !out->empty();
}

int run_sweep(const std::string& manifest, const std::string& config_path,
              const std::string& thresholds_text, const std::string& out_dir,
              const CommonArgs& common) {
  std::vector<double> thresholds;
  if (!parse_thresholds(thresholds_text, &thresholds)) {
    std::cerr << "emsift: --thresholds expects comma-separated numbers, got '"
              << thresholds_text << "'\n";
    return kExitUsage;
  }
  if (thresholds.size() < 2) {
    std::cerr << "emsift: a sweep needs at least 2 thresholds\n";
    return kExitUsage;
  }
  std::string config_text;
  if (!read_file(config_path, &config_text)) {
    std::cerr << "emsift: cannot read config " << config_path << "\n";
    return kExitUsage;
  }
  TraceSetGuard ts;
  if (int rc = load_traces(manifest, &ts); rc != kExitOk) return rc;

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    std::cerr << "emsift: cannot create " << out_dir << ": " << ec.message() << "\n";
    return kExitUsage;
  }

  emsift_analyze_options opts = make_options(common, "", "");
  SweepGuard sweep;
  emsift_status st = emsift_sweep_run(ts.ptr, config_text.c_str(), thresholds.data(),
                                      thresholds.size(), &opts, &sweep.ptr);
  if (st != EMSIFT_OK) return fail("sweep", st);

  std::vector<const emsift_report*> reports;
  for (size_t i = 0; i < emsift_sweep_size(sweep.ptr); ++i) {
    const emsift_report* report = emsift_sweep_report(sweep.ptr, i);
    reports.push_back(report);
    char name[64];
    std::snprintf(name, sizeof(name), "report_%g.json", thresholds[i]);
    std::filesystem::path path = std::filesystem::path(out_dir) / name;
    st = emsift_report_save(report, path.string().c_str());
    if (st != EMSIFT_OK) return fail("writing " + path.string(), st);
  }

  StringGuard table;
  st = emsift_render_table(reports.data(), reports.size(), &table.ptr);
  if (st != EMSIFT_OK) return fail("sweep", st);
  std::cout << table.ptr;
  std::cout << "consistency: "
            << (emsift_sweep_consistent(sweep.ptr) == 1 ? "true" : "false") << "\n";
  return kExitOk;
}

int run_heatmap(const std::string& manifest, int rows, int cols,
                const std::string& out_csv) {
  TraceSetGuard ts;
  if (int rc = load_traces(manifest, &ts); rc != kExitOk) return rc;
  emsift_status st = emsift_heatmap_write(ts.ptr, rows, cols, out_csv.c_str());
  if (st != EMSIFT_OK) return fail("heatmap", st);
  std::cout << out_csv << "\n";
  return kExitOk;
}

int run_report(const std::string& in_path) {
  ReportGuard report;
  emsift_status st = emsift_report_load(in_path.c_str(), &report.ptr);
  if (st != EMSIFT_OK) return fail("reading " + in_path, st);
  const emsift_report* borrowed = report.ptr;
  StringGuard table;
  st = emsift_render_table(&borrowed, 1, &table.ptr);
  if (st != EMSIFT_OK) return fail("report", st);
  std::cout << table.ptr;
  StringGuard line;
  st = emsift_report_summary(report.ptr, &line.ptr);
  if (st != EMSIFT_OK) return fail("report", st);
  std::cout << line.ptr << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference-free anomaly detection over electromagnetic side-channel traces"};
  app.set_version_flag("--version", emsift_version());
  app.require_subcommand(1);

  std::string config_path, out_dir, manifest, report_path, in_path;
  std::string scalograms_dir, descriptors_csv, thresholds_text, out_csv;
  bool force = false, fail_on_suspect = false;
  int rows = 0, cols = 0;
  CommonArgs sim_common, analyze_common, sweep_common;

  CLI::App* simulate = app.add_subcommand("simulate", "Synthesize a labeled trace set");
  simulate->add_option("--config", config_path, "Simulation config JSON")->required();
  simulate->add_option("--out", out_dir, "Output directory")->required();
  simulate->add_flag("--force", force, "Write into a non-empty directory");
  add_common(simulate, &sim_common);

  CLI::App* analyze = app.add_subcommand("analyze", "Run the detection pipeline");
  analyze->add_option("--manifest", manifest, "Trace-set manifest JSON")->required();
  analyze->add_option("--config", config_path, "Pipeline config JSON")->required();
  analyze->add_option("--report", report_path, "Report JSON output path")->required();
  analyze->add_option("--emit-scalograms", scalograms_dir,
                      "Directory for per-trace scalogram CSVs");
  analyze->add_option("--emit-descriptors", descriptors_csv,
                      "CSV path for per-trace descriptors");
  analyze->add_flag("--fail-on-suspect", fail_on_suspect,
                    "Exit 4 when the classification is not 'not_suspicious'");
  add_common(analyze, &analyze_common);

  CLI::App* sweep = app.add_subcommand("sweep", "Analyze at several variance thresholds");
  sweep->add_option("--manifest", manifest, "Trace-set manifest JSON")->required();
  sweep->add_option("--config", config_path, "Pipeline config JSON")->required();
  sweep->add_option("--thresholds", thresholds_text,
                    "Comma-separated variance thresholds, e.g. 0.85,0.90,0.95")
      ->required();
  sweep->add_option("--out", out_dir, "Directory for per-threshold reports")->required();
  add_common(sweep, &sweep_common);

  CLI::App* heatmap = app.add_subcommand("heatmap", "Grid heatmap of trace amplitudes");
  heatmap->add_option("--manifest", manifest, "Trace-set manifest JSON")->required();
  heatmap->add_option("--rows", rows, "Grid rows")->required()->check(CLI::PositiveNumber);
  heatmap->add_option("--cols", cols, "Grid columns")->required()->check(CLI::PositiveNumber);
  heatmap->add_option("--out", out_csv, "Heatmap CSV output path")->required();

  CLI::App* report = app.add_subcommand("report", "Render a saved report as a table");
  report->add_option("--in", in_path, "Report JSON path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::cerr << "emsift: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (simulate->parsed())
      return run_simulate(config_path, out_dir, force, sim_common);
    if (analyze->parsed())
      return run_analyze(manifest, config_path, report_path, scalograms_dir,
                         descriptors_csv, fail_on_suspect, analyze_common);
    if (sweep->parsed())
      return run_sweep(manifest, config_path, thresholds_text, out_dir, sweep_common);
    if (heatmap->parsed()) return run_heatmap(manifest, rows, cols, out_csv);
    if (report->parsed()) return run_report(in_path);
  } catch (const std::exception& e) {
    std::cerr << "emsift: " << e.what() << "\n";
    return kExitAnalysis;
  }
  return kExitUsage;
}
