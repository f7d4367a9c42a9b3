#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"

#include "emsift/matrix.hpp"

namespace emsift {

struct BgmmConfig {
  int k_max = 10;
  // Dirichlet concentration over mixture weights; <= 0 means "use 1/k_max",
  // the sparsity-inducing default that prunes unused components.
  double weight_concentration_prior = 0.0;
  // Conjugate Normal-Gamma hyperparameters (per dimension). mean_prior and
  // scale_prior default to data-derived values when empty/<=0: the data mean
  // and (dof_prior/2) * data variance respectively.
  std::vector<double> mean_prior;
  double mean_precision_prior = 1.0;
  double dof_prior = 2.0;   // Gamma shape = dof_prior / 2
  double scale_prior = 0.0; // Gamma rate
  int max_iter = 500;
  double tol = 1e-6;  // ELBO / log-likelihood absolute change threshold
  int n_init = 5;
  std::uint64_t rng_seed = 0;
};

void validate_bgmm_config(const BgmmConfig& cfg);

struct MixtureFit {
  std::vector<double> weights;                 // K, sums to 1
  std::vector<std::vector<double>> means;      // K x D
  std::vector<std::vector<double>> variances;  // K x D, diagonal
  Matrix responsibilities;                     // n x K, rows sum to 1
  // Objective trajectory of the kept restart: ELBO for variational fits,
  // log-likelihood for ML fits.
  std::vector<double> elbo_history;
  double log_likelihood = 0.0;  // plug-in at (weights, means, variances)
  bool converged = false;
  int effective_k = 0;  // components with weight >= prune threshold
};

// Variational Bayes for a diagonal-covariance Gaussian mixture: Dirichlet
// prior over weights, Normal-Gamma prior per (component, dimension). n_init
// seeded restarts (k-means++-style responsibilities); the best final ELBO is
// kept, ties broken by restart index. x is [n x dims], n >= k_max.
MixtureFit fit_bgmm(const Matrix& x, const BgmmConfig& cfg, double prune_threshold = 0.02);

// Plug-in posterior responsibilities r_{ik} = w_k f_k(x_i) / sum_j w_j f_j(x_i)
// at fixed Gaussian parameters, log-sum-exp stabilized.
Matrix responsibilities_at(const std::vector<double>& weights,
                           const std::vector<std::vector<double>>& means,
                           const std::vector<std::vector<double>>& variances, const Matrix& x);

// One variational E-step at explicitly supplied variational parameters:
// Dirichlet alphas (K), mean-precision betas (K), Gamma shapes (K), means
// (K x D) and Gamma rates (K x D). Exposed so the expected-density formula
// can be checked against an independent oracle.
Matrix vb_responsibilities_at(const std::vector<double>& alpha,
                              const std::vector<double>& beta,
                              const std::vector<double>& gamma_shape, const Matrix& means,
                              const Matrix& gamma_rate, const Matrix& x);

// Maximum-likelihood EM fit with k components. When init is given (a BGMM
// solution), the k heaviest components seed the optimizer; otherwise
// k-means++-style starts are drawn from cfg.rng_seed. Component collapse
// (variance under 1e-12 x data variance) restarts; n_init failures error out.
MixtureFit fit_ml_gmm(const Matrix& x, int k, const BgmmConfig& cfg,
                      const MixtureFit* init = nullptr);

// BIC = p ln(n) - 2 lnL with p = (k-1) + k*dims + k*dims*(dims+1)/2.
double bic(const MixtureFit& fit, std::size_t n, int k, int dims);

nlohmann::json mixture_fit_to_json(const MixtureFit& fit);

}  // namespace emsift
