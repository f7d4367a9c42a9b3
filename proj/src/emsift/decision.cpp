#include "emsift/decision.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "emsift/errors.hpp"
#include "emsift/special.hpp"

namespace emsift {

namespace {

using nlohmann::json;

void check_variances(const std::vector<double>& var) {
  for (double v : var)
    if (!(v > 0.0)) throw config_error("separation: variances must be positive");
}

// Scalars in 1-D, arrays otherwise, so the JSON mirrors the table layout.
json number_or_array(const std::vector<double>& v) {
  if (v.size() == 1) return v[0];
  return v;
}

std::vector<double> vector_from(const json& v) {
  if (v.is_number()) return {v.get<double>()};
  return v.get<std::vector<double>>();
}

std::string fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

}  // namespace

const char* classification_name(Classification c) {
  switch (c) {
    case Classification::kNotSuspicious: return "not_suspicious";
    case Classification::kModerateConfidence: return "moderate_confidence";
    case Classification::kHighConfidence: return "high_confidence";
  }
  return "not_suspicious";
}

Classification classification_from_name(const std::string& name) {
  if (name == "not_suspicious") return Classification::kNotSuspicious;
  if (name == "moderate_confidence") return Classification::kModerateConfidence;
  if (name == "high_confidence") return Classification::kHighConfidence;
  throw parse_error("unknown classification '" + name + "'");
}

void validate_decision_config(const DecisionConfig& cfg) {
  if (!(cfg.weight_threshold > 0.0 && cfg.weight_threshold < 0.5))
    throw config_error("decision: weight_threshold must be in (0, 0.5)");
  if (!(cfg.beta_moderate < cfg.beta_high))
    throw config_error("decision: beta_moderate must be below beta_high");
  if (cfg.chi2_dim < 1) throw config_error("decision: chi2_dim must be >= 1");
  if (!(cfg.bhattacharyya_floor > 0.0))
    throw config_error("decision: bhattacharyya_floor must be > 0");
}

double separation_floor(const DecisionConfig& cfg) {
  return std::sqrt(chi2_quantile(cfg.chi2_dim, 0.99));
}

SeparationResult mahalanobis_separation(const std::vector<double>& mean1,
                                        const std::vector<double>& var1,
                                        const std::vector<double>& mean2,
                                        const std::vector<double>& var2) {
  const std::size_t d = mean1.size();
  if (d == 0 || mean2.size() != d || var1.size() != d || var2.size() != d)
    throw config_error("separation: dimension mismatch");
  check_variances(var1);
  check_variances(var2);
  SeparationResult out;
  out.sigma_avg.resize(d);
  double d2 = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    out.sigma_avg[j] = 0.5 * (var1[j] + var2[j]);
    const double delta = mean1[j] - mean2[j];
    d2 += delta * delta / out.sigma_avg[j];
  }
  out.d = std::sqrt(d2);
  return out;
}

double bhattacharyya_separation(double mu1, double var1, double mu2, double var2) {
  if (!(var1 > 0.0) || !(var2 > 0.0))
    throw config_error("separation: variances must be positive");
  const double dm = mu1 - mu2;
  const double vs = var1 + var2;
  return 0.25 * dm * dm / vs + 0.5 * std::log(vs / (2.0 * std::sqrt(var1 * var2)));
}

double bhattacharyya_separation(const std::vector<double>& mean1,
                                const std::vector<double>& var1,
                                const std::vector<double>& mean2,
                                const std::vector<double>& var2) {
  const std::size_t d = mean1.size();
  if (d == 0 || mean2.size() != d || var1.size() != d || var2.size() != d)
    throw config_error("separation: dimension mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j)
    total += bhattacharyya_separation(mean1[j], var1[j], mean2[j], var2[j]);
  return total;
}

AnomalyValidation validate_anomaly(const MixtureFit& fit, const DecisionConfig& cfg) {
  validate_decision_config(cfg);
  if (fit.weights.empty()) throw config_error("decision: fit has no components");

  AnomalyValidation out;
  for (std::size_t k = 1; k < fit.weights.size(); ++k)
    if (fit.weights[k] > fit.weights[out.dominant]) out.dominant = k;

  const double floor = separation_floor(cfg);
  for (std::size_t k = 0; k < fit.weights.size(); ++k) {
    if (k == out.dominant) continue;
    if (fit.weights[k] < cfg.weight_threshold) continue;
    bool separated;
    if (cfg.separation_metric == SeparationMetric::kMahalanobis) {
      separated = mahalanobis_separation(fit.means[out.dominant], fit.variances[out.dominant],
                                         fit.means[k], fit.variances[k])
                      .d >= floor;
    } else {
      separated = bhattacharyya_separation(fit.means[out.dominant],
                                           fit.variances[out.dominant], fit.means[k],
                                           fit.variances[k]) >= cfg.bhattacharyya_floor;
    }
    if (separated) out.credible_secondary.push_back(k);
  }
  return out;
}

std::pair<double, double> aggregate_confidence(const Matrix& resp, std::size_t dominant) {
  if (resp.rows == 0 || dominant >= resp.cols)
    throw config_error("confidence: invalid responsibility matrix or cluster id");
  double sum = 0.0;
  for (std::size_t i = 0; i < resp.rows; ++i) sum += resp.at(i, dominant);
  const double alpha = sum / static_cast<double>(resp.rows);
  return {alpha, 1.0 - alpha};
}

Classification classify(double delta_bic, double beta_post, double d,
                        const DecisionConfig& cfg, std::optional<bool> consistency,
                        std::vector<std::string>* evidence_notes) {
  validate_decision_config(cfg);
  auto note = [&](const std::string& s) {
    if (evidence_notes) evidence_notes->push_back(s);
  };

  if (delta_bic < cfg.delta_bic_threshold) {
    note("delta_bic below threshold (" + fmt("%.4f", delta_bic) + " < " +
         fmt("%.0f", cfg.delta_bic_threshold) + ")");
    return Classification::kNotSuspicious;
  }
  note("delta_bic at or above threshold (" + fmt("%.4f", delta_bic) + ")");

  if (beta_post >= cfg.beta_high) {
    note("beta_post reaches high band (" + fmt("%.4f", beta_post) + " >= " +
         fmt("%.2f", cfg.beta_high) + ")");
    return Classification::kHighConfidence;
  }
  if (beta_post >= cfg.beta_moderate) {
    note("beta_post in moderate band (" + fmt("%.4f", beta_post) + ")");
    const double floor = separation_floor(cfg);
    if (d >= floor) {
      note("separation supports moderate call (D=" + fmt("%.4f", d) + " >= " +
           fmt("%.4f", floor) + ")");
      return Classification::kModerateConfidence;
    }
    if (consistency.has_value() && *consistency) {
      note("consistent outcomes across PCA thresholds support moderate call");
      return Classification::kModerateConfidence;
    }
    note("no separation or cross-threshold consistency; downgrading");
    return Classification::kNotSuspicious;
  }
  note("beta_post below moderate band (" + fmt("%.4f", beta_post) + " < " +
       fmt("%.2f", cfg.beta_moderate) + ")");
  return Classification::kNotSuspicious;
}

DetectionReport build_report(const MixtureFit& fit, double delta_bic,
                             const DecisionConfig& cfg, std::optional<bool> consistency) {
  const AnomalyValidation val = validate_anomaly(fit, cfg);

  DetectionReport report;
  report.delta_bic = delta_bic;
  report.consistency = consistency;
  report.dominant.weight = fit.weights[val.dominant];
  report.dominant.mean = fit.means[val.dominant];
  report.dominant.variance = fit.variances[val.dominant];

  if (val.credible_secondary.empty()) {
    report.alpha_post = 1.0;
    report.beta_post = 0.0;
    report.d = 0.0;
    report.classification = Classification::kNotSuspicious;
    report.evidence_notes.push_back(
        "no credible secondary cluster (weight or separation floor not met)");
    return report;
  }

  // Heaviest credible secondary carries the table row; beta aggregates all
  // non-dominant responsibility mass.
  std::size_t second = val.credible_secondary.front();
  for (std::size_t k : val.credible_secondary)
    if (fit.weights[k] > fit.weights[second]) second = k;

  report.secondary = ClusterSummary{fit.weights[second], fit.means[second],
                                    fit.variances[second]};
  SeparationResult sep =
      mahalanobis_separation(fit.means[val.dominant], fit.variances[val.dominant],
                             fit.means[second], fit.variances[second]);
  report.d = sep.d;
  report.sigma_avg = std::move(sep.sigma_avg);

  auto [alpha, beta] = aggregate_confidence(fit.responsibilities, val.dominant);
  report.alpha_post = alpha;
  report.beta_post = beta;
  report.evidence_notes.push_back("credible secondary cluster (weight=" +
                                  fmt("%.4f", fit.weights[second]) +
                                  ", D=" + fmt("%.4f", report.d) + ")");
  report.classification =
      classify(delta_bic, beta, report.d, cfg, consistency, &report.evidence_notes);
  return report;
}

bool consistency_check(const std::vector<DetectionReport>& reports) {
  if (reports.size() < 2)
    throw config_error("consistency check needs at least 2 reports");
  for (const DetectionReport& r : reports)
    if (!r.secondary) return false;
  for (std::size_t i = 0; i < reports.size(); ++i)
    for (std::size_t j = i + 1; j < reports.size(); ++j)
      if (std::abs(reports[i].beta_post - reports[j].beta_post) >= 0.10) return false;
  return true;
}

nlohmann::json report_to_json(const DetectionReport& report) {
  json doc;
  doc["pi_max"] = report.dominant.weight;
  doc["mu_dom"] = number_or_array(report.dominant.mean);
  doc["sigma_dom"] = number_or_array(report.dominant.variance);
  if (report.secondary) {
    doc["pi_min"] = report.secondary->weight;
    doc["mu_anom"] = number_or_array(report.secondary->mean);
    doc["sigma_anom"] = number_or_array(report.secondary->variance);
    doc["sigma_avg"] = number_or_array(report.sigma_avg);
  } else {
    doc["pi_min"] = nullptr;
    doc["mu_anom"] = nullptr;
    doc["sigma_anom"] = nullptr;
    doc["sigma_avg"] = nullptr;
  }
  doc["d"] = report.d;
  doc["alpha_post"] = report.alpha_post;
  doc["beta_post"] = report.beta_post;
  doc["delta_bic"] = report.delta_bic;
  doc["classification"] = classification_name(report.classification);
  doc["evidence_notes"] = report.evidence_notes;
  if (report.consistency.has_value()) doc["consistency"] = *report.consistency;

  json prov;
  prov["name"] = report.provenance.name;
  prov["n_traces"] = report.provenance.n_traces;
  prov["n_components_used"] = report.provenance.n_components_used;
  prov["variance_threshold"] = report.provenance.variance_threshold;
  prov["effective_k"] = report.provenance.effective_k;
  prov["bgmm_seed"] = report.provenance.bgmm_seed;
  prov["weight_seed"] = report.provenance.weight_seed;
  prov["n_scales"] = report.provenance.n_scales;
  prov["feature_dim"] = report.provenance.feature_dim;
  doc["provenance"] = std::move(prov);

  if (report.ml) {
    json ml;
    ml["k_alt"] = report.ml->k_alt;
    ml["bic_single"] = report.ml->bic_single;
    ml["bic_alt"] = report.ml->bic_alt;
    ml["log_likelihood_single"] = report.ml->log_likelihood_single;
    ml["log_likelihood_alt"] = report.ml->log_likelihood_alt;
    ml["weights_alt"] = report.ml->weights_alt;
    doc["ml"] = std::move(ml);
  }
  if (!report.config_echo.is_null()) doc["config_echo"] = report.config_echo;
  return doc;
}

DetectionReport report_from_json(const nlohmann::json& doc) {
  DetectionReport report;
  try {
    report.dominant.weight = doc.at("pi_max").get<double>();
    report.dominant.mean = vector_from(doc.at("mu_dom"));
    report.dominant.variance = vector_from(doc.at("sigma_dom"));
    if (doc.contains("pi_min") && !doc["pi_min"].is_null()) {
      ClusterSummary second;
      second.weight = doc["pi_min"].get<double>();
      second.mean = vector_from(doc.at("mu_anom"));
      second.variance = vector_from(doc.at("sigma_anom"));
      report.secondary = std::move(second);
      report.sigma_avg = vector_from(doc.at("sigma_avg"));
    }
    report.d = doc.at("d").get<double>();
    report.alpha_post = doc.at("alpha_post").get<double>();
    report.beta_post = doc.at("beta_post").get<double>();
    report.delta_bic = doc.at("delta_bic").get<double>();
    report.classification = classification_from_name(doc.at("classification").get<std::string>());
    if (doc.contains("evidence_notes"))
      report.evidence_notes = doc["evidence_notes"].get<std::vector<std::string>>();
    if (doc.contains("consistency") && !doc["consistency"].is_null())
      report.consistency = doc["consistency"].get<bool>();
    if (doc.contains("provenance")) {
      const json& prov = doc["provenance"];
      report.provenance.name = prov.value("name", std::string());
      report.provenance.n_traces = prov.value("n_traces", std::size_t{0});
      report.provenance.n_components_used = prov.value("n_components_used", 0);
      report.provenance.variance_threshold = prov.value("variance_threshold", 0.0);
      report.provenance.effective_k = prov.value("effective_k", 0);
      report.provenance.bgmm_seed = prov.value("bgmm_seed", std::uint64_t{0});
      report.provenance.weight_seed = prov.value("weight_seed", std::uint64_t{0});
      report.provenance.n_scales = prov.value("n_scales", 0);
      report.provenance.feature_dim = prov.value("feature_dim", 0);
    }
    if (doc.contains("ml") && !doc["ml"].is_null()) {
      const json& ml = doc["ml"];
      MlComparison cmp;
      cmp.k_alt = ml.value("k_alt", 2);
      cmp.bic_single = ml.value("bic_single", 0.0);
      cmp.bic_alt = ml.value("bic_alt", 0.0);
      cmp.log_likelihood_single = ml.value("log_likelihood_single", 0.0);
      cmp.log_likelihood_alt = ml.value("log_likelihood_alt", 0.0);
      if (ml.contains("weights_alt"))
        cmp.weights_alt = ml["weights_alt"].get<std::vector<double>>();
      report.ml = std::move(cmp);
    }
    if (doc.contains("config_echo")) report.config_echo = doc["config_echo"];
  } catch (const json::exception& e) {
    throw parse_error(std::string("report: ") + e.what());
  }
  return report;
}

std::string report_summary_line(const DetectionReport& report) {
  std::string out = classification_name(report.classification);
  out += " β=" + fmt("%.3f", report.beta_post);
  out += " ΔBIC=" + fmt("%.1f", report.delta_bic);
  out += " D=" + fmt("%.2f", report.d);
  return out;
}

namespace {

// printf pads by bytes, which misaligns the Greek column labels; pad by code
// point instead (every label glyph is single-width).
std::string pad_cell(const std::string& s, std::size_t width, bool left) {
  std::size_t points = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++points;
  std::string fill(points < width ? width - points : 0, ' ');
  return left ? s + fill : fill + s;
}

}  // namespace

std::string render_report_table(const std::vector<DetectionReport>& reports) {
  std::ostringstream out;
  char line[256];
  out << pad_cell("Name", 18, true) << ' ' << pad_cell("π_max/π_min", 15, true) << ' '
      << pad_cell("D", 9, false) << ' ' << pad_cell("α_post", 8, false) << ' '
      << pad_cell("β_post", 8, false) << ' ' << pad_cell("ΔBIC", 12, false)
      << "  Classification\n";
  out << std::string(92, '-') << '\n';
  for (const DetectionReport& r : reports) {
    std::string name = r.provenance.name.empty() ? "trace_set" : r.provenance.name;
    std::string weights = fmt("%.4f", r.dominant.weight) + "/" +
                          (r.secondary ? fmt("%.4f", r.secondary->weight) : "-");
    std::snprintf(line, sizeof(line), "%-18s %-15s %9.4f %8.4f %8.4f %12.4f  %s\n",
                  name.c_str(), weights.c_str(), r.d, r.alpha_post, r.beta_post,
                  r.delta_bic, classification_name(r.classification));
    out << line;
  }
  return out.str();
}

}  // namespace emsift
