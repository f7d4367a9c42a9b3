#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "emsift.h"

namespace fs = std::filesystem;

namespace {

const char* kSimConfig = R"({
  "n_traces": 40,
  "samples_per_trace": 128,
  "noise_sigma": 0.1,
  "rng_seed": 5
})";

const char* kPipelineConfig = R"({
  "wavelet": {"n_scales": 8},
  "features": {"extractor": {
    "input_h": 16, "input_w": 16,
    "filters_per_stage": [4, 6],
    "feature_dim": 6,
    "weight_seed": 99
  }},
  "bgmm": {"k_max": 4, "n_init": 2, "rng_seed": 11}
})";

fs::path fresh_dir(const std::string& leaf) {
  fs::path dir = fs::temp_directory_path() / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct TraceSetGuard {
  emsift_trace_set* ts = nullptr;
  ~TraceSetGuard() { emsift_trace_set_free(ts); }
};

struct ReportGuard {
  emsift_report* r = nullptr;
  ~ReportGuard() { emsift_report_free(r); }
};

struct SweepGuard {
  emsift_sweep* s = nullptr;
  ~SweepGuard() { emsift_sweep_free(s); }
};

}  // namespace

TEST_CASE("capi: version string and error reset") {
  const char* v = emsift_version();
  REQUIRE(v != nullptr);
  CHECK(std::string(v) == "0.1.0");
  CHECK(std::string(emsift_last_error()).empty());
}

TEST_CASE("capi: simulate, save, reload and analyze a trace set") {
  TraceSetGuard sim;
  REQUIRE(emsift_trace_set_simulate(kSimConfig, 0, 0, 1, &sim.ts) == EMSIFT_OK);
  CHECK(emsift_trace_set_size(sim.ts) == 40);
  CHECK(std::string(emsift_last_error()).empty());

  fs::path dir = fresh_dir("emsift_capi_roundtrip");
  char* manifest = nullptr;
  REQUIRE(emsift_trace_set_save(sim.ts, dir.string().c_str(), &manifest) == EMSIFT_OK);
  REQUIRE(manifest != nullptr);
  CHECK(fs::exists(manifest));
  CHECK(fs::exists(dir / "labels.json"));  // simulated sets keep ground truth

  TraceSetGuard loaded;
  REQUIRE(emsift_trace_set_load(manifest, &loaded.ts) == EMSIFT_OK);
  CHECK(emsift_trace_set_size(loaded.ts) == 40);
  emsift_string_free(manifest);

  ReportGuard report;
  REQUIRE(emsift_analyze(loaded.ts, kPipelineConfig, nullptr, &report.r) == EMSIFT_OK);
  int cls = emsift_report_classification(report.r);
  CHECK(cls >= EMSIFT_NOT_SUSPICIOUS);
  CHECK(cls <= EMSIFT_HIGH_CONFIDENCE);

  char* summary = nullptr;
  REQUIRE(emsift_report_summary(report.r, &summary) == EMSIFT_OK);
  REQUIRE(summary != nullptr);
  CHECK(std::strlen(summary) > 0);
  emsift_string_free(summary);

  char* json_text = nullptr;
  REQUIRE(emsift_report_to_json(report.r, &json_text) == EMSIFT_OK);
  nlohmann::json doc = nlohmann::json::parse(json_text);
  CHECK(doc.contains("alpha_post"));
  CHECK(doc.contains("delta_bic"));
  CHECK(doc["provenance"]["n_traces"] == 40);
  emsift_string_free(json_text);

  fs::remove_all(dir);
}

TEST_CASE("capi: analyze options override seed, name and emit paths") {
  TraceSetGuard sim;
  REQUIRE(emsift_trace_set_simulate(kSimConfig, 1, 77, 2, &sim.ts) == EMSIFT_OK);

  fs::path dir = fresh_dir("emsift_capi_options");
  std::string desc_csv = (dir / "descriptors.csv").string();
  emsift_analyze_options opts;
  std::memset(&opts, 0, sizeof(opts));
  opts.jobs = 2;
  opts.use_seed = 1;
  opts.seed = 1234;
  opts.descriptors_csv = desc_csv.c_str();
  opts.dataset_name = "capi_demo";

  ReportGuard report;
  REQUIRE(emsift_analyze(sim.ts, kPipelineConfig, &opts, &report.r) == EMSIFT_OK);
  CHECK(fs::exists(desc_csv));

  char* json_text = nullptr;
  REQUIRE(emsift_report_to_json(report.r, &json_text) == EMSIFT_OK);
  nlohmann::json doc = nlohmann::json::parse(json_text);
  CHECK(doc["provenance"]["name"] == "capi_demo");
  CHECK(doc["provenance"]["bgmm_seed"] == 1234);
  CHECK(doc["provenance"]["weight_seed"] == 1234);
  emsift_string_free(json_text);

  fs::remove_all(dir);
}

TEST_CASE("capi: report save and load round trip") {
  TraceSetGuard sim;
  REQUIRE(emsift_trace_set_simulate(kSimConfig, 0, 0, 1, &sim.ts) == EMSIFT_OK);
  ReportGuard report;
  REQUIRE(emsift_analyze(sim.ts, kPipelineConfig, nullptr, &report.r) == EMSIFT_OK);

  fs::path dir = fresh_dir("emsift_capi_report");
  std::string path = (dir / "report.json").string();
  REQUIRE(emsift_report_save(report.r, path.c_str()) == EMSIFT_OK);

  ReportGuard loaded;
  REQUIRE(emsift_report_load(path.c_str(), &loaded.r) == EMSIFT_OK);
  char* a = nullptr;
  char* b = nullptr;
  REQUIRE(emsift_report_to_json(report.r, &a) == EMSIFT_OK);
  REQUIRE(emsift_report_to_json(loaded.r, &b) == EMSIFT_OK);
  CHECK(nlohmann::json::parse(a) == nlohmann::json::parse(b));
  emsift_string_free(a);
  emsift_string_free(b);

  char* table = nullptr;
  const emsift_report* rows[2] = {report.r, loaded.r};
  REQUIRE(emsift_render_table(rows, 2, &table) == EMSIFT_OK);
  CHECK(std::string(table).find("Name") != std::string::npos);
  emsift_string_free(table);

  fs::remove_all(dir);
}

TEST_CASE("capi: sweep exposes per-threshold reports and the consistency flag") {
  TraceSetGuard sim;
  REQUIRE(emsift_trace_set_simulate(kSimConfig, 0, 0, 1, &sim.ts) == EMSIFT_OK);

  const double thresholds[3] = {0.85, 0.90, 0.95};
  SweepGuard sweep;
  REQUIRE(emsift_sweep_run(sim.ts, kPipelineConfig, thresholds, 3, nullptr,
                           &sweep.s) == EMSIFT_OK);
  CHECK(emsift_sweep_size(sweep.s) == 3);
  int consistent = emsift_sweep_consistent(sweep.s);
  CHECK((consistent == 0 || consistent == 1));

  const emsift_report* borrowed = emsift_sweep_report(sweep.s, 1);
  REQUIRE(borrowed != nullptr);
  CHECK(emsift_report_classification(borrowed) >= 0);
  CHECK(emsift_sweep_report(sweep.s, 3) == nullptr);

  // A single threshold is rejected before any work happens.
  SweepGuard bad;
  CHECK(emsift_sweep_run(sim.ts, kPipelineConfig, thresholds, 1, nullptr, &bad.s) ==
        EMSIFT_CONFIG_ERROR);
  CHECK(std::string(emsift_last_error()).find("sweep") != std::string::npos);
}

TEST_CASE("capi: status codes and last_error for failure paths") {
  CHECK(emsift_trace_set_load(nullptr, nullptr) == EMSIFT_INVALID_ARGUMENT);
  CHECK(std::strlen(emsift_last_error()) > 0);

  TraceSetGuard missing;
  CHECK(emsift_trace_set_load("/nonexistent/manifest.json", &missing.ts) ==
        EMSIFT_IO_ERROR);

  TraceSetGuard bad_json;
  CHECK(emsift_trace_set_simulate("{not json", 0, 0, 1, &bad_json.ts) ==
        EMSIFT_PARSE_ERROR);
  CHECK(std::strlen(emsift_last_error()) > 0);

  TraceSetGuard bad_cfg;
  CHECK(emsift_trace_set_simulate(R"({"samples_per_trace": 8})", 0, 0, 1,
                                  &bad_cfg.ts) == EMSIFT_CONFIG_ERROR);

  TraceSetGuard sim;
  REQUIRE(emsift_trace_set_simulate(kSimConfig, 0, 0, 1, &sim.ts) == EMSIFT_OK);
  ReportGuard r;
  CHECK(emsift_analyze(sim.ts, "{bad", nullptr, &r.r) == EMSIFT_PARSE_ERROR);
  CHECK(emsift_analyze(nullptr, kPipelineConfig, nullptr, &r.r) ==
        EMSIFT_INVALID_ARGUMENT);
  CHECK(emsift_analyze(sim.ts, kPipelineConfig, nullptr, nullptr) ==
        EMSIFT_INVALID_ARGUMENT);

  // Degenerate data maps to the analysis status.
  nlohmann::json quiet = nlohmann::json::parse(kSimConfig);
  quiet["noise_sigma"] = 0.0;
  quiet["drift_amp"] = 0.0;
  quiet["phase_jitter"] = 0.0;
  quiet["harmonic_amps"] = {0.0};
  quiet["burst_amp"] = 0.0;
  TraceSetGuard flat;
  REQUIRE(emsift_trace_set_simulate(quiet.dump().c_str(), 0, 0, 1, &flat.ts) ==
          EMSIFT_OK);
  ReportGuard flat_report;
  CHECK(emsift_analyze(flat.ts, kPipelineConfig, nullptr, &flat_report.r) ==
        EMSIFT_ANALYSIS_ERROR);
  CHECK(std::string(emsift_last_error()).find("[per_trace]") != std::string::npos);

  CHECK(emsift_report_classification(nullptr) == -1);
  CHECK(emsift_sweep_consistent(nullptr) == -1);
  CHECK(emsift_sweep_size(nullptr) == 0);
  CHECK(emsift_trace_set_size(nullptr) == 0);

  // Frees tolerate NULL.
  emsift_trace_set_free(nullptr);
  emsift_report_free(nullptr);
  emsift_sweep_free(nullptr);
  emsift_string_free(nullptr);
}

TEST_CASE("capi: heatmap needs grid positions") {
  TraceSetGuard sim;
  REQUIRE(emsift_trace_set_simulate(kSimConfig, 0, 0, 1, &sim.ts) == EMSIFT_OK);
  fs::path dir = fresh_dir("emsift_capi_heatmap");
  std::string csv = (dir / "heatmap.csv").string();
  // Simulated traces carry no grid positions: every cell is empty, which is
  // still a well-formed CSV of "nan" cells.
  REQUIRE(emsift_heatmap_write(sim.ts, 2, 3, csv.c_str()) == EMSIFT_OK);
  CHECK(fs::exists(csv));
  CHECK(emsift_heatmap_write(sim.ts, 0, 3, csv.c_str()) == EMSIFT_CONFIG_ERROR);
  CHECK(emsift_heatmap_write(nullptr, 2, 3, csv.c_str()) == EMSIFT_INVALID_ARGUMENT);
  fs::remove_all(dir);
}
