#include "emsift.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "emsift/decision.hpp"
#include "emsift/errors.hpp"
#include "emsift/pipeline.hpp"
#include "emsift/simulator.hpp"
#include "emsift/trace.hpp"
#include "emsift/trace_io.hpp"

struct emsift_trace_set {
  emsift::LabeledTraceSet set;  // labels empty for loaded (unlabeled) sets
};

struct emsift_report {
  emsift::DetectionReport report;
};

struct emsift_sweep {
  std::vector<emsift_report> reports;
  bool consistent = false;
};

namespace {

thread_local std::string g_last_error;

emsift_status fail(emsift_status code, const char* what) {
  g_last_error = what;
  return code;
}

// Runs fn, translating the library's exception classes to status codes.
template <typename Fn>
emsift_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return EMSIFT_OK;
  } catch (const emsift::io_error& e) {
    return fail(EMSIFT_IO_ERROR, e.what());
  } catch (const emsift::parse_error& e) {
    return fail(EMSIFT_PARSE_ERROR, e.what());
  } catch (const emsift::config_error& e) {
    return fail(EMSIFT_CONFIG_ERROR, e.what());
  } catch (const emsift::analysis_error& e) {
    return fail(EMSIFT_ANALYSIS_ERROR, e.what());
  } catch (const std::bad_alloc& e) {
    return fail(EMSIFT_ANALYSIS_ERROR, "out of memory");
  } catch (const std::exception& e) {
    return fail(EMSIFT_ANALYSIS_ERROR, e.what());
  }
}

emsift_status invalid(const char* what) { return fail(EMSIFT_INVALID_ARGUMENT, what); }

nlohmann::json parse_json_text(const char* text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw emsift::parse_error(std::string(what) + ": " + e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

emsift::PipelineConfig make_pipeline_config(const char* config_json,
                                            const emsift_analyze_options* opts) {
  emsift::PipelineConfig cfg;
  if (config_json && *config_json)
    cfg = emsift::pipeline_config_from_json(parse_json_text(config_json, "pipeline config"));
  if (opts) {
    if (opts->jobs > 0) cfg.jobs = opts->jobs;
    if (opts->use_seed) {
      cfg.bgmm.rng_seed = opts->seed;
      cfg.extractor.weight_seed = opts->seed;
    }
    if (opts->scalograms_dir) cfg.emit.scalograms_dir = opts->scalograms_dir;
    if (opts->descriptors_csv) cfg.emit.descriptors_csv = opts->descriptors_csv;
    if (opts->dataset_name) cfg.dataset_name = opts->dataset_name;
  }
  return cfg;
}

}  // namespace

extern "C" {

const char* emsift_version(void) { return "0.1.0"; }

const char* emsift_last_error(void) { return g_last_error.c_str(); }

void emsift_string_free(char* s) { std::free(s); }

emsift_status emsift_trace_set_load(const char* manifest_path, emsift_trace_set** out) {
  if (!manifest_path || !out) return invalid("emsift_trace_set_load: NULL argument");
  *out = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<emsift_trace_set>();
    handle->set.traces = emsift::load_trace_set(manifest_path);
    *out = handle.release();
  });
}

emsift_status emsift_trace_set_simulate(const char* config_json, int use_seed,
                                        uint64_t seed, int jobs, emsift_trace_set** out) {
  if (!config_json || !out) return invalid("emsift_trace_set_simulate: NULL argument");
  *out = nullptr;
  return guarded([&] {
    emsift::SimConfig cfg =
        emsift::sim_config_from_json(parse_json_text(config_json, "simulation config"));
    if (use_seed) cfg.rng_seed = seed;
    auto handle = std::make_unique<emsift_trace_set>();
    handle->set = emsift::simulate(cfg, jobs > 0 ? jobs : 1);
    *out = handle.release();
  });
}

emsift_status emsift_trace_set_save(const emsift_trace_set* ts, const char* dir,
                                    char** manifest_path_out) {
  if (!ts || !dir) return invalid("emsift_trace_set_save: NULL argument");
  return guarded([&] {
    std::filesystem::path manifest =
        ts->set.labels.empty() ? emsift::write_trace_set(ts->set.traces, dir)
                               : emsift::write_trace_set(ts->set, dir);
    if (manifest_path_out) *manifest_path_out = copy_string(manifest.string());
  });
}

size_t emsift_trace_set_size(const emsift_trace_set* ts) {
  return ts ? ts->set.traces.traces.size() : 0;
}

void emsift_trace_set_free(emsift_trace_set* ts) { delete ts; }

emsift_status emsift_analyze(const emsift_trace_set* ts, const char* config_json,
                             const emsift_analyze_options* opts, emsift_report** out) {
  if (!ts || !out) return invalid("emsift_analyze: NULL argument");
  *out = nullptr;
  return guarded([&] {
    emsift::PipelineConfig cfg = make_pipeline_config(config_json, opts);
    auto handle = std::make_unique<emsift_report>();
    handle->report = emsift::run_pipeline(ts->set.traces, cfg);
    *out = handle.release();
  });
}

emsift_status emsift_sweep_run(const emsift_trace_set* ts, const char* config_json,
                               const double* thresholds, size_t n_thresholds,
                               const emsift_analyze_options* opts, emsift_sweep** out) {
  if (!ts || !thresholds || !out) return invalid("emsift_sweep_run: NULL argument");
  *out = nullptr;
  return guarded([&] {
    emsift::PipelineConfig cfg = make_pipeline_config(config_json, opts);
    std::vector<double> values(thresholds, thresholds + n_thresholds);
    emsift::SweepResult result = emsift::run_threshold_sweep(ts->set.traces, cfg, values);
    auto handle = std::make_unique<emsift_sweep>();
    handle->consistent = result.consistent;
    handle->reports.reserve(result.reports.size());
    for (emsift::DetectionReport& r : result.reports)
      handle->reports.push_back(emsift_report{std::move(r)});
    *out = handle.release();
  });
}

emsift_status emsift_heatmap_write(const emsift_trace_set* ts, int rows, int cols,
                                   const char* out_csv) {
  if (!ts || !out_csv) return invalid("emsift_heatmap_write: NULL argument");
  return guarded([&] {
    emsift::Heatmap map = emsift::assemble_heatmap(ts->set.traces, rows, cols);
    emsift::write_heatmap_csv(map, out_csv);
  });
}

emsift_status emsift_report_to_json(const emsift_report* r, char** out_json) {
  if (!r || !out_json) return invalid("emsift_report_to_json: NULL argument");
  *out_json = nullptr;
  return guarded([&] {
    *out_json = copy_string(emsift::report_to_json(r->report).dump(2));
  });
}

emsift_status emsift_report_save(const emsift_report* r, const char* path) {
  if (!r || !path) return invalid("emsift_report_save: NULL argument");
  return guarded([&] {
    std::ofstream out(path);
    if (!out) throw emsift::io_error(std::string("cannot write ") + path);
    out << emsift::report_to_json(r->report).dump(2) << '\n';
    if (!out) throw emsift::io_error(std::string("write failed: ") + path);
  });
}

emsift_status emsift_report_load(const char* path, emsift_report** out) {
  if (!path || !out) return invalid("emsift_report_load: NULL argument");
  *out = nullptr;
  return guarded([&] {
    std::ifstream in(path);
    if (!in) throw emsift::io_error(std::string("cannot read ") + path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    auto handle = std::make_unique<emsift_report>();
    handle->report =
        emsift::report_from_json(parse_json_text(text.c_str(), "report file"));
    *out = handle.release();
  });
}

emsift_status emsift_report_summary(const emsift_report* r, char** out_line) {
  if (!r || !out_line) return invalid("emsift_report_summary: NULL argument");
  *out_line = nullptr;
  return guarded([&] {
    *out_line = copy_string(emsift::report_summary_line(r->report));
  });
}

int emsift_report_classification(const emsift_report* r) {
  if (!r) return -1;
  switch (r->report.classification) {
    case emsift::Classification::kNotSuspicious: return EMSIFT_NOT_SUSPICIOUS;
    case emsift::Classification::kModerateConfidence: return EMSIFT_MODERATE_CONFIDENCE;
    case emsift::Classification::kHighConfidence: return EMSIFT_HIGH_CONFIDENCE;
  }
  return -1;
}

void emsift_report_free(emsift_report* r) { delete r; }

emsift_status emsift_render_table(const emsift_report* const* reports, size_t n_reports,
                                  char** out_text) {
  if (!reports || !out_text || n_reports == 0)
    return invalid("emsift_render_table: NULL argument or empty report list");
  *out_text = nullptr;
  return guarded([&] {
    std::vector<emsift::DetectionReport> rows;
    rows.reserve(n_reports);
    for (size_t i = 0; i < n_reports; ++i) {
      if (!reports[i]) throw emsift::config_error("render_table: NULL report entry");
      rows.push_back(reports[i]->report);
    }
    *out_text = copy_string(emsift::render_report_table(rows));
  });
}

size_t emsift_sweep_size(const emsift_sweep* s) { return s ? s->reports.size() : 0; }

const emsift_report* emsift_sweep_report(const emsift_sweep* s, size_t index) {
  if (!s || index >= s->reports.size()) return nullptr;
  return &s->reports[index];
}

int emsift_sweep_consistent(const emsift_sweep* s) {
  if (!s) return -1;
  return s->consistent ? 1 : 0;
}

void emsift_sweep_free(emsift_sweep* s) { delete s; }

}  // extern "C"
