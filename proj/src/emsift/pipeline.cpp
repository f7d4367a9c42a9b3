#include "emsift/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "emsift/errors.hpp"
#include "emsift/parallel.hpp"
#include "emsift/pca.hpp"

namespace emsift {

namespace {

using nlohmann::json;

// Rethrows stage failures with the stage name prefixed, preserving the error
// class so exit-code mapping stays correct.
template <typename Fn>
auto run_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const io_error& e) {
    throw io_error(std::string("[") + stage + "] " + e.what());
  } catch (const parse_error& e) {
    throw parse_error(std::string("[") + stage + "] " + e.what());
  } catch (const config_error& e) {
    throw config_error(std::string("[") + stage + "] " + e.what());
  } catch (const analysis_error& e) {
    throw analysis_error(std::string("[") + stage + "] " + e.what());
  } catch (const std::exception& e) {
    throw analysis_error(std::string("[") + stage + "] " + e.what());
  }
}

WaveletConfig resolve_wavelet(const WaveletConfig& cfg, double sampling_rate) {
  WaveletConfig out = cfg;
  if (out.f_max <= 0.0) out.f_max = 0.45 * sampling_rate;
  if (out.f_min <= 0.0) out.f_min = out.f_max / 180.0;
  return out;
}

// Everything computed once per trace set, shared across sweep thresholds.
struct FeatureStage {
  Eigen::MatrixXd x;                  // n x feature_dim
  std::vector<std::string> trace_ids;
  PcaModel pca;
};

FeatureStage compute_features(const TraceSet& traces, const PipelineConfig& cfg) {
  const std::size_t n = traces.traces.size();
  FeatureStage out;
  out.trace_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.trace_ids[i] = traces.traces[i].trace_id;

  std::vector<FeatureVector> features(n);
  if (cfg.use_external_features) {
    run_stage("features", [&] {
      std::vector<FeatureVector> imported = import_external_features(cfg.external_features_csv);
      if (imported.size() != n)
        throw config_error("external feature rows (" + std::to_string(imported.size()) +
                           ") do not match trace count (" + std::to_string(n) + ")");
      features = std::move(imported);
      return 0;
    });
  } else {
    const double fs = traces.traces.front().sampling_rate;
    const std::size_t len = traces.traces.front().samples.size();
    const WaveletConfig wavelet = resolve_wavelet(cfg.wavelet, fs);
    const CwtPlan plan = run_stage("cwt", [&] { return CwtPlan(wavelet, fs, len); });
    const FeatureExtractor extractor =
        run_stage("features", [&] { return FeatureExtractor(cfg.extractor); });

    const bool emit_scalograms = !cfg.emit.scalograms_dir.empty();
    if (emit_scalograms) {
      std::error_code ec;
      std::filesystem::create_directories(cfg.emit.scalograms_dir, ec);
      if (ec) throw io_error("[cwt] cannot create scalogram directory: " +
                             cfg.emit.scalograms_dir);
    }

    run_stage("per_trace", [&] {
      parallel_for(n, cfg.jobs, [&](std::size_t i) {
        EmTrace prepared = traces.traces[i];
        if (cfg.band) prepared = bandlimit(prepared, cfg.band->first, cfg.band->second);
        prepared = normalize_trace(prepared, cfg.normalization);
        Scalogram scalogram = plan.transform(prepared);
        if (emit_scalograms) {
          char name[48];
          std::snprintf(name, sizeof(name), "scalogram_%05zu.csv", i);
          write_scalogram_csv(scalogram,
                              std::filesystem::path(cfg.emit.scalograms_dir) / name);
        }
        Matrix img = resize_scalogram(scalogram, cfg.extractor.input_h, cfg.extractor.input_w);
        features[i] = extractor.extract(img, prepared.trace_id);
      });
      return 0;
    });
  }

  const std::size_t dim = features.front().values.size();
  for (const FeatureVector& f : features)
    if (f.values.size() != dim)
      throw analysis_error("[features] inconsistent feature dimensions");
  out.x.resize(n, dim);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < dim; ++j) out.x(i, j) = features[i].values[j];

  out.pca = run_stage("pca", [&] { return fit_pca(out.x); });
  return out;
}

struct ThresholdAnalysis {
  DetectionReport report;
  DescriptorSet descriptors;
};

ThresholdAnalysis analyze_at_threshold(const FeatureStage& stage, const PipelineConfig& cfg,
                                       double threshold, std::optional<bool> consistency) {
  const std::size_t n = stage.x.rows();
  const int k = run_stage("pca", [&] { return select_components(stage.pca, threshold); });

  ThresholdAnalysis out;
  Matrix cluster_input;
  if (cfg.cluster_space == "pca_scores") {
    const Eigen::MatrixXd scores =
        run_stage("pca", [&] { return project(stage.pca, stage.x, k); });
    cluster_input = Matrix(n, k);
    for (std::size_t i = 0; i < n; ++i)
      for (int j = 0; j < k; ++j) cluster_input.at(i, j) = scores(i, j);
    out.descriptors.n_components_used = k;
    out.descriptors.variance_threshold = threshold;
  } else {
    out.descriptors = run_stage(
        "descriptors", [&] { return weighted_sum_descriptors(stage.pca, stage.x, k); });
    out.descriptors.variance_threshold = threshold;
    const auto [lo, hi] = std::minmax_element(out.descriptors.raw_weighted_sums.begin(),
                                              out.descriptors.raw_weighted_sums.end());
    if (!(*hi - *lo > 0.0))
      throw analysis_error(
          "[descriptors] constant descriptors: the trace set has no usable variation");
    cluster_input = Matrix(n, 1);
    for (std::size_t i = 0; i < n; ++i)
      cluster_input.at(i, 0) = out.descriptors.descriptors[i];
  }

  const MixtureFit fit = run_stage("bgmm", [&] {
    return fit_bgmm(cluster_input, cfg.bgmm, cfg.decision.weight_threshold);
  });

  const int dims = static_cast<int>(cluster_input.cols);
  const int k_alt = std::max(2, fit.effective_k);
  double delta_bic = 0.0;
  MlComparison ml;
  run_stage("delta_bic", [&] {
    const MixtureFit fit1 = fit_ml_gmm(cluster_input, 1, cfg.bgmm, nullptr);
    const MixtureFit* warm = fit.effective_k >= 2 ? &fit : nullptr;
    const MixtureFit fit_alt = fit_ml_gmm(cluster_input, k_alt, cfg.bgmm, warm);
    const double bic1 = bic(fit1, n, 1, dims);
    const double bic_alt = bic(fit_alt, n, k_alt, dims);
    delta_bic = bic1 - bic_alt;
    ml.k_alt = k_alt;
    ml.bic_single = bic1;
    ml.bic_alt = bic_alt;
    ml.log_likelihood_single = fit1.log_likelihood;
    ml.log_likelihood_alt = fit_alt.log_likelihood;
    ml.weights_alt = fit_alt.weights;
    return 0;
  });

  out.report = run_stage(
      "decision", [&] { return build_report(fit, delta_bic, cfg.decision, consistency); });
  out.report.ml = std::move(ml);
  out.report.provenance.name = cfg.dataset_name.empty() ? "trace_set" : cfg.dataset_name;
  out.report.provenance.n_traces = n;
  out.report.provenance.n_components_used = k;
  out.report.provenance.variance_threshold = threshold;
  out.report.provenance.effective_k = fit.effective_k;
  out.report.provenance.bgmm_seed = cfg.bgmm.rng_seed;
  out.report.provenance.weight_seed =
      cfg.use_external_features ? 0 : cfg.extractor.weight_seed;
  out.report.provenance.n_scales = cfg.wavelet.n_scales;
  out.report.provenance.feature_dim = static_cast<int>(stage.x.cols());
  out.report.config_echo = pipeline_config_to_json(cfg);
  return out;
}

void emit_descriptors(const FeatureStage& stage, const DescriptorSet& d,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("[descriptors] cannot write " + path);
  out << "trace_id,raw_weighted_sum,descriptor\n";
  char buf[96];
  for (std::size_t i = 0; i < d.descriptors.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g", d.raw_weighted_sums[i], d.descriptors[i]);
    out << stage.trace_ids[i] << ',' << buf << '\n';
  }
}

void check_preconditions(const TraceSet& traces, const PipelineConfig& cfg) {
  run_stage("validate", [&] {
    validate_pipeline_config(cfg);
    validate_trace_set(traces);
    if (traces.traces.size() < static_cast<std::size_t>(cfg.bgmm.k_max))
      throw config_error("need at least k_max (" + std::to_string(cfg.bgmm.k_max) +
                         ") traces, got " + std::to_string(traces.traces.size()));
    return 0;
  });
}

}  // namespace

void validate_pipeline_config(const PipelineConfig& cfg) {
  if (cfg.use_external_features && cfg.external_features_csv.empty())
    throw config_error("pipeline: external feature path is empty");
  if (!(cfg.variance_threshold > 0.0 && cfg.variance_threshold <= 1.0))
    throw config_error("pipeline: variance_threshold must be in (0, 1]");
  if (cfg.jobs < 1) throw config_error("pipeline: jobs must be >= 1");
  if (cfg.cluster_space != "descriptor" && cfg.cluster_space != "pca_scores")
    throw config_error("pipeline: cluster_space must be 'descriptor' or 'pca_scores'");
  if (cfg.band && !(cfg.band->first >= 0.0 && cfg.band->first < cfg.band->second))
    throw config_error("pipeline: band must satisfy 0 <= lo < hi");
  if (!cfg.use_external_features) validate_extractor_config(cfg.extractor);
  validate_bgmm_config(cfg.bgmm);
  validate_decision_config(cfg.decision);
}

DetectionReport run_pipeline(const TraceSet& traces, const PipelineConfig& cfg) {
  check_preconditions(traces, cfg);
  const FeatureStage stage = compute_features(traces, cfg);
  if (!cfg.emit.variance_curve_csv.empty())
    run_stage("pca", [&] {
      write_variance_curve_csv(stage.pca, cfg.emit.variance_curve_csv);
      return 0;
    });
  ThresholdAnalysis analysis =
      analyze_at_threshold(stage, cfg, cfg.variance_threshold, std::nullopt);
  if (!cfg.emit.descriptors_csv.empty() && cfg.cluster_space == "descriptor")
    run_stage("descriptors", [&] {
      emit_descriptors(stage, analysis.descriptors, cfg.emit.descriptors_csv);
      return 0;
    });
  return std::move(analysis.report);
}

SweepResult run_threshold_sweep(const TraceSet& traces, const PipelineConfig& cfg,
                                const std::vector<double>& thresholds) {
  if (thresholds.size() < 2)
    throw config_error("[sweep] need at least 2 variance thresholds");
  for (double t : thresholds)
    if (!(t > 0.0 && t <= 1.0))
      throw config_error("[sweep] thresholds must be in (0, 1]");
  check_preconditions(traces, cfg);

  const FeatureStage stage = compute_features(traces, cfg);
  SweepResult out;
  out.reports.reserve(thresholds.size());
  for (double t : thresholds)
    out.reports.push_back(analyze_at_threshold(stage, cfg, t, std::nullopt).report);

  out.consistent = consistency_check(out.reports);

  // Second pass: the flag can lift moderate-band cases, so re-run the tier
  // rule with it. The first note (the secondary-cluster line) survives; the
  // tier notes are regenerated.
  for (DetectionReport& report : out.reports) {
    report.consistency = out.consistent;
    if (report.secondary) {
      report.evidence_notes.resize(1);
      report.classification = classify(report.delta_bic, report.beta_post, report.d,
                                       cfg.decision, out.consistent, &report.evidence_notes);
    }
  }
  return out;
}

PipelineConfig pipeline_config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw parse_error("pipeline config: expected a JSON object");
  PipelineConfig cfg;
  try {
    if (doc.contains("normalization")) {
      const std::string mode = doc["normalization"].get<std::string>();
      if (mode == "zscore") cfg.normalization = NormalizeMode::kZscore;
      else if (mode == "unit_energy") cfg.normalization = NormalizeMode::kUnitEnergy;
      else throw parse_error("pipeline config: unknown normalization '" + mode + "'");
    }
    if (doc.contains("band") && !doc["band"].is_null()) {
      const json& band = doc["band"];
      if (!band.is_array() || band.size() != 2)
        throw parse_error("pipeline config: band must be [f_lo, f_hi]");
      cfg.band = {band[0].get<double>(), band[1].get<double>()};
    }
    if (doc.contains("wavelet")) {
      const json& w = doc["wavelet"];
      if (w.contains("omega0")) cfg.wavelet.omega0 = w["omega0"].get<double>();
      if (w.contains("n_scales")) cfg.wavelet.n_scales = w["n_scales"].get<int>();
      if (w.contains("f_min")) cfg.wavelet.f_min = w["f_min"].get<double>();
      if (w.contains("f_max")) cfg.wavelet.f_max = w["f_max"].get<double>();
      if (w.contains("scale_spacing") &&
          w["scale_spacing"].get<std::string>() != "logarithmic")
        throw parse_error("pipeline config: only logarithmic scale_spacing is supported");
    }
    if (doc.contains("features")) {
      const json& f = doc["features"];
      const bool has_extractor = f.contains("extractor");
      const bool has_external = f.contains("external_csv");
      if (has_extractor && has_external)
        throw config_error(
            "pipeline config: select exactly one of features.extractor / "
            "features.external_csv");
      if (has_external) {
        cfg.use_external_features = true;
        cfg.external_features_csv = f["external_csv"].get<std::string>();
      } else if (has_extractor) {
        const json& e = f["extractor"];
        if (e.contains("input_h")) cfg.extractor.input_h = e["input_h"].get<int>();
        if (e.contains("input_w")) cfg.extractor.input_w = e["input_w"].get<int>();
        if (e.contains("n_stages")) cfg.extractor.n_stages = e["n_stages"].get<int>();
        if (e.contains("filters_per_stage")) {
          cfg.extractor.filters_per_stage = e["filters_per_stage"].get<std::vector<int>>();
          // The array already pins the stage count; require n_stages only
          // when the two are both given (validation catches a mismatch).
          if (!e.contains("n_stages"))
            cfg.extractor.n_stages = static_cast<int>(cfg.extractor.filters_per_stage.size());
        }
        if (e.contains("feature_dim")) cfg.extractor.feature_dim = e["feature_dim"].get<int>();
        if (e.contains("kernel_size")) cfg.extractor.kernel_size = e["kernel_size"].get<int>();
        if (e.contains("pool_stride")) cfg.extractor.pool_stride = e["pool_stride"].get<int>();
        if (e.contains("weight_seed"))
          cfg.extractor.weight_seed = e["weight_seed"].get<std::uint64_t>();
      }
    }
    if (doc.contains("variance_threshold"))
      cfg.variance_threshold = doc["variance_threshold"].get<double>();
    if (doc.contains("bgmm")) {
      const json& b = doc["bgmm"];
      if (b.contains("k_max")) cfg.bgmm.k_max = b["k_max"].get<int>();
      if (b.contains("weight_concentration_prior"))
        cfg.bgmm.weight_concentration_prior = b["weight_concentration_prior"].get<double>();
      if (b.contains("mean_prior"))
        cfg.bgmm.mean_prior = b["mean_prior"].get<std::vector<double>>();
      if (b.contains("mean_precision_prior"))
        cfg.bgmm.mean_precision_prior = b["mean_precision_prior"].get<double>();
      if (b.contains("dof_prior")) cfg.bgmm.dof_prior = b["dof_prior"].get<double>();
      if (b.contains("scale_prior")) cfg.bgmm.scale_prior = b["scale_prior"].get<double>();
      if (b.contains("max_iter")) cfg.bgmm.max_iter = b["max_iter"].get<int>();
      if (b.contains("tol")) cfg.bgmm.tol = b["tol"].get<double>();
      if (b.contains("n_init")) cfg.bgmm.n_init = b["n_init"].get<int>();
      if (b.contains("rng_seed")) cfg.bgmm.rng_seed = b["rng_seed"].get<std::uint64_t>();
    }
    if (doc.contains("decision")) {
      const json& d = doc["decision"];
      if (d.contains("weight_threshold"))
        cfg.decision.weight_threshold = d["weight_threshold"].get<double>();
      if (d.contains("separation_metric")) {
        const std::string metric = d["separation_metric"].get<std::string>();
        if (metric == "mahalanobis")
          cfg.decision.separation_metric = SeparationMetric::kMahalanobis;
        else if (metric == "bhattacharyya")
          cfg.decision.separation_metric = SeparationMetric::kBhattacharyya;
        else throw parse_error("pipeline config: unknown separation_metric '" + metric + "'");
      }
      if (d.contains("chi2_dim")) cfg.decision.chi2_dim = d["chi2_dim"].get<int>();
      if (d.contains("delta_bic_threshold"))
        cfg.decision.delta_bic_threshold = d["delta_bic_threshold"].get<double>();
      if (d.contains("beta_high")) cfg.decision.beta_high = d["beta_high"].get<double>();
      if (d.contains("beta_moderate"))
        cfg.decision.beta_moderate = d["beta_moderate"].get<double>();
      if (d.contains("bhattacharyya_floor"))
        cfg.decision.bhattacharyya_floor = d["bhattacharyya_floor"].get<double>();
      if (d.contains("pca_thresholds_for_consistency"))
        cfg.decision.pca_thresholds_for_consistency =
            d["pca_thresholds_for_consistency"].get<std::vector<double>>();
    }
    if (doc.contains("emit")) {
      const json& e = doc["emit"];
      if (e.contains("scalograms_dir"))
        cfg.emit.scalograms_dir = e["scalograms_dir"].get<std::string>();
      if (e.contains("descriptors_csv"))
        cfg.emit.descriptors_csv = e["descriptors_csv"].get<std::string>();
      if (e.contains("variance_curve_csv"))
        cfg.emit.variance_curve_csv = e["variance_curve_csv"].get<std::string>();
    }
    if (doc.contains("jobs")) cfg.jobs = doc["jobs"].get<int>();
    if (doc.contains("cluster_space"))
      cfg.cluster_space = doc["cluster_space"].get<std::string>();
    if (doc.contains("name")) cfg.dataset_name = doc["name"].get<std::string>();
  } catch (const json::exception& e) {
    throw parse_error(std::string("pipeline config: ") + e.what());
  }
  validate_pipeline_config(cfg);
  return cfg;
}

nlohmann::json pipeline_config_to_json(const PipelineConfig& cfg) {
  json doc;
  doc["normalization"] =
      cfg.normalization == NormalizeMode::kZscore ? "zscore" : "unit_energy";
  if (cfg.band) doc["band"] = {cfg.band->first, cfg.band->second};
  json w;
  w["omega0"] = cfg.wavelet.omega0;
  w["n_scales"] = cfg.wavelet.n_scales;
  if (cfg.wavelet.f_min > 0.0) w["f_min"] = cfg.wavelet.f_min;
  if (cfg.wavelet.f_max > 0.0) w["f_max"] = cfg.wavelet.f_max;
  w["scale_spacing"] = "logarithmic";
  doc["wavelet"] = std::move(w);
  json features;
  if (cfg.use_external_features) {
    features["external_csv"] = cfg.external_features_csv;
  } else {
    json e;
    e["input_h"] = cfg.extractor.input_h;
    e["input_w"] = cfg.extractor.input_w;
    e["n_stages"] = cfg.extractor.n_stages;
    e["filters_per_stage"] = cfg.extractor.filters_per_stage;
    e["feature_dim"] = cfg.extractor.feature_dim;
    e["kernel_size"] = cfg.extractor.kernel_size;
    e["pool_stride"] = cfg.extractor.pool_stride;
    e["weight_seed"] = cfg.extractor.weight_seed;
    features["extractor"] = std::move(e);
  }
  doc["features"] = std::move(features);
  doc["variance_threshold"] = cfg.variance_threshold;
  json b;
  b["k_max"] = cfg.bgmm.k_max;
  if (cfg.bgmm.weight_concentration_prior > 0.0)
    b["weight_concentration_prior"] = cfg.bgmm.weight_concentration_prior;
  if (!cfg.bgmm.mean_prior.empty()) b["mean_prior"] = cfg.bgmm.mean_prior;
  b["mean_precision_prior"] = cfg.bgmm.mean_precision_prior;
  b["dof_prior"] = cfg.bgmm.dof_prior;
  if (cfg.bgmm.scale_prior > 0.0) b["scale_prior"] = cfg.bgmm.scale_prior;
  b["max_iter"] = cfg.bgmm.max_iter;
  b["tol"] = cfg.bgmm.tol;
  b["n_init"] = cfg.bgmm.n_init;
  b["rng_seed"] = cfg.bgmm.rng_seed;
  doc["bgmm"] = std::move(b);
  json d;
  d["weight_threshold"] = cfg.decision.weight_threshold;
  d["separation_metric"] =
      cfg.decision.separation_metric == SeparationMetric::kMahalanobis ? "mahalanobis"
                                                                       : "bhattacharyya";
  d["chi2_dim"] = cfg.decision.chi2_dim;
  d["delta_bic_threshold"] = cfg.decision.delta_bic_threshold;
  d["beta_high"] = cfg.decision.beta_high;
  d["beta_moderate"] = cfg.decision.beta_moderate;
  d["bhattacharyya_floor"] = cfg.decision.bhattacharyya_floor;
  d["pca_thresholds_for_consistency"] = cfg.decision.pca_thresholds_for_consistency;
  doc["decision"] = std::move(d);
  if (!cfg.emit.scalograms_dir.empty() || !cfg.emit.descriptors_csv.empty() ||
      !cfg.emit.variance_curve_csv.empty()) {
    json e;
    if (!cfg.emit.scalograms_dir.empty()) e["scalograms_dir"] = cfg.emit.scalograms_dir;
    if (!cfg.emit.descriptors_csv.empty()) e["descriptors_csv"] = cfg.emit.descriptors_csv;
    if (!cfg.emit.variance_curve_csv.empty())
      e["variance_curve_csv"] = cfg.emit.variance_curve_csv;
    doc["emit"] = std::move(e);
  }
  doc["jobs"] = cfg.jobs;
  doc["cluster_space"] = cfg.cluster_space;
  if (!cfg.dataset_name.empty()) doc["name"] = cfg.dataset_name;
  return doc;
}

}  // namespace emsift
