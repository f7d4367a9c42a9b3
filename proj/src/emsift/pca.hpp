#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Dense>

namespace emsift {

struct PcaModel {
  Eigen::VectorXd mean;                       // column means of the fitted data
  Eigen::MatrixXd components;                 // rows, orthonormal, descending variance
  Eigen::VectorXd explained_variance;         // eigenvalues, (n-1) convention
  Eigen::VectorXd explained_variance_ratio;   // eigenvalue / trace of covariance
};

// Centers by column means and extracts min(n-1, dim) principal axes via SVD
// of the centered matrix (equivalent to eigendecomposition of the sample
// covariance). Sign convention: the largest-magnitude entry of each component
// is positive, so fits are reproducible.
PcaModel fit_pca(const Eigen::MatrixXd& X);

// Smallest k whose cumulative explained-variance ratio reaches the threshold;
// all components when the threshold is never reached.
int select_components(const PcaModel& m, double threshold);

// Projections of centered rows onto the first k components: [n x k].
Eigen::MatrixXd project(const PcaModel& m, const Eigen::MatrixXd& X, int k);

struct DescriptorSet {
  std::vector<double> raw_weighted_sums;  // per trace
  std::vector<double> descriptors;        // min-max normalized to [0,1]
  int n_components_used = 0;
  double variance_threshold = 0.0;
};

// Per-trace scalar: raw_i = sum_j ratio_j * score_{i,j} over the first k
// components, then min-max normalization over the trace set. All-equal raw
// sums map to 0.5 (degenerate rule).
DescriptorSet weighted_sum_descriptors(const PcaModel& m, const Eigen::MatrixXd& X, int k);

// Cumulative explained-variance curve as CSV (component index, ratio,
// cumulative ratio).
void write_variance_curve_csv(const PcaModel& m, const std::filesystem::path& path);

}  // namespace emsift
