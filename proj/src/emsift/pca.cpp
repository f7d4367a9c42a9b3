#include "emsift/pca.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "emsift/errors.hpp"

namespace emsift {

PcaModel fit_pca(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  const Eigen::Index dim = X.cols();
  if (n < 2) throw config_error("pca: need at least 2 rows");
  if (dim < 1) throw config_error("pca: need at least 1 column");
  if (!X.allFinite()) throw analysis_error("pca: non-finite entries");

  PcaModel model;
  model.mean = X.colwise().mean();
  Eigen::MatrixXd centered = X.rowwise() - model.mean.transpose();

  // Total variance = trace of the sample covariance; denominators cancel in
  // the ratios but the eigenvalues keep the (n-1) convention.
  const double total_variance = centered.squaredNorm() / static_cast<double>(n - 1);

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::Index r = std::min<Eigen::Index>(n - 1, dim);

  model.components.resize(r, dim);
  model.explained_variance.resize(r);
  model.explained_variance_ratio.resize(r);
  for (Eigen::Index j = 0; j < r; ++j) {
    Eigen::VectorXd v = svd.matrixV().col(j);
    // Deterministic sign: flip so the largest-magnitude entry is positive.
    Eigen::Index arg_max = 0;
    v.cwiseAbs().maxCoeff(&arg_max);
    if (v(arg_max) < 0.0) v = -v;
    model.components.row(j) = v.transpose();
    const double sv = svd.singularValues()(j);
    const double eigenvalue = sv * sv / static_cast<double>(n - 1);
    model.explained_variance(j) = eigenvalue;
    model.explained_variance_ratio(j) =
        total_variance > 0.0 ? eigenvalue / total_variance : 0.0;
  }
  return model;
}

int select_components(const PcaModel& m, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw config_error("pca: variance threshold must be in (0, 1]");
  double cumulative = 0.0;
  for (Eigen::Index j = 0; j < m.explained_variance_ratio.size(); ++j) {
    cumulative += m.explained_variance_ratio(j);
    if (cumulative >= threshold) return static_cast<int>(j) + 1;
  }
  return static_cast<int>(m.explained_variance_ratio.size());
}

Eigen::MatrixXd project(const PcaModel& m, const Eigen::MatrixXd& X, int k) {
  if (k < 1 || k > m.components.rows())
    throw config_error("pca: component count out of range");
  if (X.cols() != m.mean.size()) throw config_error("pca: dimension mismatch");
  Eigen::MatrixXd centered = X.rowwise() - m.mean.transpose();
  return centered * m.components.topRows(k).transpose();
}

DescriptorSet weighted_sum_descriptors(const PcaModel& m, const Eigen::MatrixXd& X, int k) {
  Eigen::MatrixXd scores = project(m, X, k);
  const Eigen::Index n = scores.rows();

  DescriptorSet out;
  out.n_components_used = k;
  out.raw_weighted_sums.resize(n);
  Eigen::VectorXd weights = m.explained_variance_ratio.head(k);
  Eigen::VectorXd raw = scores * weights;
  for (Eigen::Index i = 0; i < n; ++i) out.raw_weighted_sums[i] = raw(i);

  const double lo = raw.minCoeff();
  const double hi = raw.maxCoeff();
  out.descriptors.resize(n);
  if (hi - lo > 0.0) {
    for (Eigen::Index i = 0; i < n; ++i) out.descriptors[i] = (raw(i) - lo) / (hi - lo);
  } else {
    std::fill(out.descriptors.begin(), out.descriptors.end(), 0.5);
  }
  return out;
}

void write_variance_curve_csv(const PcaModel& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write variance curve: " + path.string());
  out << "component,ratio,cumulative\n";
  out.precision(12);
  double cumulative = 0.0;
  for (Eigen::Index j = 0; j < m.explained_variance_ratio.size(); ++j) {
    cumulative += m.explained_variance_ratio(j);
    out << (j + 1) << ',' << m.explained_variance_ratio(j) << ',' << cumulative << '\n';
  }
}

}  // namespace emsift
