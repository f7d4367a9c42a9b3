#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "emsift/bgmm.hpp"

namespace emsift {

enum class SeparationMetric { kMahalanobis, kBhattacharyya };
enum class Classification { kNotSuspicious, kModerateConfidence, kHighConfidence };

const char* classification_name(Classification c);
Classification classification_from_name(const std::string& name);

struct DecisionConfig {
  // Secondary clusters below this mixture weight are spurious noise fits.
  double weight_threshold = 0.02;
  // Metric used for the secondary-cluster credibility floor. The report's D
  // column is always the Mahalanobis separation.
  SeparationMetric separation_metric = SeparationMetric::kMahalanobis;
  int chi2_dim = 1;  // p for the chi-squared 99% separation floor
  double delta_bic_threshold = 10.0;
  double beta_high = 0.30;
  double beta_moderate = 0.20;
  double bhattacharyya_floor = 0.5;
  std::vector<double> pca_thresholds_for_consistency = {0.85, 0.90, 0.95};
};

void validate_decision_config(const DecisionConfig& cfg);

// sqrt of the chi-squared 99% quantile at cfg.chi2_dim: the minimum
// Mahalanobis separation for a credible secondary cluster.
double separation_floor(const DecisionConfig& cfg);

struct ClusterSummary {
  double weight = 0.0;
  std::vector<double> mean;
  std::vector<double> variance;
};

struct AnomalyValidation {
  std::size_t dominant = 0;
  std::vector<std::size_t> credible_secondary;  // ascending component index
};

// Dominant = largest weight (ties -> lower index). A non-dominant component
// is credible iff its weight reaches weight_threshold AND its separation from
// the dominant cluster reaches the configured floor.
AnomalyValidation validate_anomaly(const MixtureFit& fit, const DecisionConfig& cfg);

struct SeparationResult {
  double d = 0.0;
  std::vector<double> sigma_avg;  // pooled (average) variance per dimension
};

// D^2 = dmu' * diag(sigma_avg)^-1 * dmu with sigma_avg = (var1 + var2) / 2.
SeparationResult mahalanobis_separation(const std::vector<double>& mean1,
                                        const std::vector<double>& var1,
                                        const std::vector<double>& mean2,
                                        const std::vector<double>& var2);

// 1-D Gaussian Bhattacharyya distance; the vector form sums per-dimension
// distances (diagonal covariance factorizes the coefficient).
double bhattacharyya_separation(double mu1, double var1, double mu2, double var2);
double bhattacharyya_separation(const std::vector<double>& mean1,
                                const std::vector<double>& var1,
                                const std::vector<double>& mean2,
                                const std::vector<double>& var2);

// alpha = mean dominant-cluster responsibility over traces; beta = 1 - alpha.
std::pair<double, double> aggregate_confidence(const Matrix& resp, std::size_t dominant);

// Three-tier rule: high iff dBIC >= threshold and beta >= beta_high; moderate
// iff dBIC >= threshold, beta in [beta_moderate, beta_high), and (D >= floor
// or consistency); otherwise not suspicious. Evidence notes record which
// criteria fired.
Classification classify(double delta_bic, double beta_post, double d,
                        const DecisionConfig& cfg, std::optional<bool> consistency,
                        std::vector<std::string>* evidence_notes = nullptr);

struct ReportProvenance {
  std::string name;  // dataset label
  std::size_t n_traces = 0;
  int n_components_used = 0;
  double variance_threshold = 0.0;
  int effective_k = 0;
  std::uint64_t bgmm_seed = 0;
  std::uint64_t weight_seed = 0;
  int n_scales = 0;
  int feature_dim = 0;
};

// ML-fit evidence behind the Delta-BIC column.
struct MlComparison {
  int k_alt = 2;
  double bic_single = 0.0;
  double bic_alt = 0.0;
  double log_likelihood_single = 0.0;
  double log_likelihood_alt = 0.0;
  std::vector<double> weights_alt;
};

struct DetectionReport {
  ClusterSummary dominant;
  std::optional<ClusterSummary> secondary;  // heaviest credible secondary
  double d = 0.0;                           // Mahalanobis separation
  std::vector<double> sigma_avg;            // empty when no secondary
  double alpha_post = 1.0;
  double beta_post = 0.0;
  double delta_bic = 0.0;
  Classification classification = Classification::kNotSuspicious;
  std::vector<std::string> evidence_notes;
  std::optional<bool> consistency;  // set when produced by a threshold sweep
  ReportProvenance provenance;
  std::optional<MlComparison> ml;
  nlohmann::json config_echo;
};

// Combines cluster validation, separation, confidence aggregation and the
// tier rule into a report. delta_bic is computed by the caller (it needs the
// ML fits). No credible secondary collapses to (alpha=1, beta=0,
// not_suspicious) regardless of delta_bic.
DetectionReport build_report(const MixtureFit& fit, double delta_bic,
                             const DecisionConfig& cfg, std::optional<bool> consistency);

// True iff every report has a credible secondary cluster and all beta_post
// values pairwise differ by less than 0.10. Needs >= 2 reports.
bool consistency_check(const std::vector<DetectionReport>& reports);

nlohmann::json report_to_json(const DetectionReport& report);
DetectionReport report_from_json(const nlohmann::json& doc);

// One-line summary: "<classification> β=0.495 ΔBIC=2760.1 D=10.51".
std::string report_summary_line(const DetectionReport& report);

// Fixed-width text table over several reports (columns: name, weights, D,
// alpha, beta, delta-BIC, classification).
std::string render_report_table(const std::vector<DetectionReport>& reports);

}  // namespace emsift
