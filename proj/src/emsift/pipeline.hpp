#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "emsift/bgmm.hpp"
#include "emsift/cwt.hpp"
#include "emsift/decision.hpp"
#include "emsift/features.hpp"
#include "emsift/trace.hpp"

namespace emsift {

struct EmitConfig {
  std::string scalograms_dir;     // per-trace scalogram CSVs + sidecars
  std::string descriptors_csv;    // trace_id, raw weighted sum, descriptor
  std::string variance_curve_csv; // PCA cumulative-variance curve
};

struct PipelineConfig {
  NormalizeMode normalization = NormalizeMode::kZscore;
  // Optional brick-wall band-pass applied before normalization.
  std::optional<std::pair<double, double>> band;
  // Wavelet band defaults are resolved against the trace sampling rate:
  // f_max -> 0.45 * fs (0.9 Nyquist), f_min -> f_max / 180.
  WaveletConfig wavelet;
  // Exactly one feature source: the internal extractor (default) or an
  // externally computed feature CSV.
  bool use_external_features = false;
  std::string external_features_csv;
  FeatureExtractorConfig extractor;
  double variance_threshold = 0.90;
  BgmmConfig bgmm;
  DecisionConfig decision;
  EmitConfig emit;
  int jobs = 1;
  // "descriptor" clusters the 1-D weighted-sum descriptor (primary mode);
  // "pca_scores" clusters the selected PCA score vectors directly.
  std::string cluster_space = "descriptor";
  std::string dataset_name;
};

void validate_pipeline_config(const PipelineConfig& cfg);

// Parses the single-document JSON config. The "features" object must select
// exactly one of {"extractor": {...}} or {"external_csv": "path"}; omitting
// it selects the internal extractor with defaults.
PipelineConfig pipeline_config_from_json(const nlohmann::json& doc);
nlohmann::json pipeline_config_to_json(const PipelineConfig& cfg);

// Full flow: validate -> band-limit -> normalize -> CWT -> features -> PCA ->
// descriptors -> BGMM -> delta-BIC -> decision. Per-trace stages run as a
// parallel map bounded by cfg.jobs; results are independent of jobs. Stage
// failures are rethrown with the stage name prefixed.
DetectionReport run_pipeline(const TraceSet& traces, const PipelineConfig& cfg);

struct SweepResult {
  std::vector<DetectionReport> reports;  // one per threshold, in input order
  bool consistent = false;
};

// Re-runs the PCA-and-later stages per variance threshold over shared
// features, applies consistency_check, and re-classifies each report with the
// resulting flag (the moderate tier may be reached via consistency).
SweepResult run_threshold_sweep(const TraceSet& traces, const PipelineConfig& cfg,
                                const std::vector<double>& thresholds);

}  // namespace emsift
