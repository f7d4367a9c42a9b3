#include "emsift/bgmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "emsift/errors.hpp"
#include "emsift/rng.hpp"
#include "emsift/special.hpp"

namespace emsift {

namespace {

constexpr double kLn2Pi = 1.8378770664093453;  // ln(2*pi)
constexpr double kVarFloorRatio = 1e-10;       // reported-variance floor, x data variance
constexpr double kCollapseRatio = 1e-12;       // ML collapse threshold, x data variance
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct DataStats {
  std::vector<double> mean;
  std::vector<double> var;  // population convention
};

DataStats data_stats(const Matrix& x) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  DataStats s;
  s.mean.assign(d, 0.0);
  s.var.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += row[j];
  }
  for (double& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double delta = row[j] - s.mean[j];
      s.var[j] += delta * delta;
    }
  }
  for (double& v : s.var) v /= static_cast<double>(n);
  return s;
}

void validate_data(const Matrix& x) {
  if (x.rows < 1 || x.cols < 1) throw config_error("mixture: empty data");
  for (double v : x.data)
    if (!std::isfinite(v)) throw analysis_error("mixture: non-finite data");
}

// Hard one-hot responsibilities from k-means++-style center selection.
Matrix kmeanspp_init(const Matrix& x, int k, Rng& rng) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  std::vector<std::size_t> centers;
  centers.reserve(k);
  centers.push_back(rng.uniform_below(n));

  std::vector<double> dist2(n, std::numeric_limits<double>::max());
  auto update_dist = [&](std::size_t center) {
    const double* c = x.row(center);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = x.row(i);
      double d2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double delta = row[j] - c[j];
        d2 += delta * delta;
      }
      dist2[i] = std::min(dist2[i], d2);
    }
  };
  update_dist(centers.back());
  while (static_cast<int>(centers.size()) < k) {
    double total = std::accumulate(dist2.begin(), dist2.end(), 0.0);
    std::size_t pick;
    if (total > 0.0) {
      double u = rng.uniform01() * total;
      pick = n - 1;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += dist2[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_below(n);  // degenerate (duplicated) data
    }
    centers.push_back(pick);
    update_dist(pick);
  }

  Matrix resp(n, k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.row(i);
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::max();
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double* ctr = x.row(centers[c]);
      double d2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double delta = row[j] - ctr[j];
        d2 += delta * delta;
      }
      if (d2 < best_d2) {
        best_d2 = d2;
        best = c;
      }
    }
    resp.at(i, best) = 1.0;
  }
  return resp;
}

struct Priors {
  double alpha0 = 0.0;
  double beta0 = 0.0;
  double a0 = 0.0;
  std::vector<double> m0;
  std::vector<double> b0;
};

struct VbState {
  std::vector<double> alpha;  // K
  std::vector<double> beta;   // K
  std::vector<double> a;      // K (gamma shape, shared across dims)
  Matrix m;                   // K x D
  Matrix b;                   // K x D (gamma rates)
  // M-step sufficient statistics, kept for the ELBO.
  std::vector<double> nk;     // K
  Matrix xbar;                // K x D
  Matrix s;                   // K x D within-component scatter / nk
};

void m_step(const Matrix& x, const Matrix& resp, const Priors& prior, VbState& st) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  const std::size_t k = resp.cols;

  st.nk.assign(k, 0.0);
  st.xbar = Matrix(k, d, 0.0);
  st.s = Matrix(k, d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.row(i);
    const double* r = resp.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      if (r[c] == 0.0) continue;
      st.nk[c] += r[c];
      for (std::size_t j = 0; j < d; ++j) st.xbar.at(c, j) += r[c] * row[j];
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (st.nk[c] > 0.0)
      for (std::size_t j = 0; j < d; ++j) st.xbar.at(c, j) /= st.nk[c];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.row(i);
    const double* r = resp.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      if (r[c] == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) {
        const double delta = row[j] - st.xbar.at(c, j);
        st.s.at(c, j) += r[c] * delta * delta;
      }
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (st.nk[c] > 0.0)
      for (std::size_t j = 0; j < d; ++j) st.s.at(c, j) /= st.nk[c];
  }

  st.alpha.assign(k, 0.0);
  st.beta.assign(k, 0.0);
  st.a.assign(k, 0.0);
  st.m = Matrix(k, d, 0.0);
  st.b = Matrix(k, d, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const double nk = st.nk[c];
    st.alpha[c] = prior.alpha0 + nk;
    st.beta[c] = prior.beta0 + nk;
    st.a[c] = prior.a0 + 0.5 * nk;
    for (std::size_t j = 0; j < d; ++j) {
      st.m.at(c, j) = (prior.beta0 * prior.m0[j] + nk * st.xbar.at(c, j)) / st.beta[c];
      const double dm = st.xbar.at(c, j) - prior.m0[j];
      st.b.at(c, j) = prior.b0[j] + 0.5 * (nk * st.s.at(c, j) +
                                           prior.beta0 * nk * dm * dm / st.beta[c]);
    }
  }
}

// Expected log responsibilities at the current variational parameters.
Matrix e_step(const Matrix& x, const VbState& st) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  const std::size_t k = st.alpha.size();

  const double alpha_sum = std::accumulate(st.alpha.begin(), st.alpha.end(), 0.0);
  const double psi_alpha_sum = digamma(alpha_sum);
  std::vector<double> base(k, 0.0);      // E[ln pi_k] + 0.5 sum_d (E[ln l] - ln2pi - 1/beta)
  Matrix prec(k, d);                     // a_k / b_kd
  for (std::size_t c = 0; c < k; ++c) {
    double acc = digamma(st.alpha[c]) - psi_alpha_sum;
    for (std::size_t j = 0; j < d; ++j) {
      const double e_ln_lambda = digamma(st.a[c]) - std::log(st.b.at(c, j));
      acc += 0.5 * (e_ln_lambda - kLn2Pi - 1.0 / st.beta[c]);
      prec.at(c, j) = st.a[c] / st.b.at(c, j);
    }
    base[c] = acc;
  }

  Matrix resp(n, k);
  std::vector<double> ln_rho(k);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.row(i);
    double mx = kNegInf;
    for (std::size_t c = 0; c < k; ++c) {
      double quad = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double delta = row[j] - st.m.at(c, j);
        quad += prec.at(c, j) * delta * delta;
      }
      ln_rho[c] = base[c] - 0.5 * quad;
      mx = std::max(mx, ln_rho[c]);
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) denom += std::exp(ln_rho[c] - mx);
    const double ln_denom = mx + std::log(denom);
    for (std::size_t c = 0; c < k; ++c) resp.at(i, c) = std::exp(ln_rho[c] - ln_denom);
  }
  return resp;
}

double elbo(const Matrix& resp, const Priors& prior, const VbState& st) {
  const std::size_t k = st.alpha.size();
  const std::size_t d = st.m.cols;
  const double alpha_sum = std::accumulate(st.alpha.begin(), st.alpha.end(), 0.0);
  const double psi_alpha_sum = digamma(alpha_sum);

  double t1 = 0.0, t2 = 0.0, t4 = 0.0, t7 = 0.0;
  double sum_e_ln_pi = 0.0;
  double t6 = -(std::lgamma(alpha_sum));
  for (std::size_t c = 0; c < k; ++c) {
    const double e_ln_pi = digamma(st.alpha[c]) - psi_alpha_sum;
    sum_e_ln_pi += e_ln_pi;
    t2 += st.nk[c] * e_ln_pi;
    t6 += std::lgamma(st.alpha[c]) - (st.alpha[c] - 1.0) * e_ln_pi;
    const double psi_a = digamma(st.a[c]);
    for (std::size_t j = 0; j < d; ++j) {
      const double e_ln_lambda = psi_a - std::log(st.b.at(c, j));
      const double e_prec = st.a[c] / st.b.at(c, j);
      const double dm_fit = st.xbar.at(c, j) - st.m.at(c, j);
      t1 += 0.5 * st.nk[c] *
            (e_ln_lambda - kLn2Pi - 1.0 / st.beta[c] -
             e_prec * (st.s.at(c, j) + dm_fit * dm_fit));
      const double dm0 = st.m.at(c, j) - prior.m0[j];
      t4 += 0.5 * (std::log(prior.beta0 / (2.0 * std::numbers::pi)) + e_ln_lambda -
                   prior.beta0 / st.beta[c] - prior.beta0 * e_prec * dm0 * dm0) +
            prior.a0 * std::log(prior.b0[j]) - std::lgamma(prior.a0) +
            (prior.a0 - 1.0) * e_ln_lambda - prior.b0[j] * e_prec;
      t7 += -0.5 * std::log(st.beta[c] / (2.0 * std::numbers::pi)) - 0.5 * e_ln_lambda + 0.5 +
            st.a[c] - std::log(st.b.at(c, j)) + std::lgamma(st.a[c]) +
            (1.0 - st.a[c]) * psi_a;
    }
  }
  const double t3 = std::lgamma(k * prior.alpha0) - k * std::lgamma(prior.alpha0) +
                    (prior.alpha0 - 1.0) * sum_e_ln_pi;
  double t5 = 0.0;
  for (double r : resp.data)
    if (r > 0.0) t5 -= r * std::log(r);
  return t1 + t2 + t3 + t4 + t5 + t6 + t7;
}

// Shared log-density evaluation; fills resp when given. Returns total lnL.
double eval_mixture(const Matrix& x, const std::vector<double>& weights,
                    const std::vector<std::vector<double>>& means,
                    const std::vector<std::vector<double>>& variances, Matrix* resp) {
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  const std::size_t k = weights.size();
  if (means.size() != k || variances.size() != k)
    throw config_error("mixture: parameter sizes disagree");

  std::vector<double> ln_w(k);
  std::vector<std::vector<double>> ln_norm(k);
  for (std::size_t c = 0; c < k; ++c) {
    if (means[c].size() != d || variances[c].size() != d)
      throw config_error("mixture: parameter dimensions disagree");
    for (double v : variances[c])
      if (!(v > 0.0)) throw config_error("mixture: variances must be positive");
    ln_w[c] = weights[c] > 0.0 ? std::log(weights[c]) : kNegInf;
    ln_norm[c].resize(d);
    for (std::size_t j = 0; j < d; ++j)
      ln_norm[c][j] = -0.5 * (kLn2Pi + std::log(variances[c][j]));
  }

  double total = 0.0;
  std::vector<double> ln_p(k);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = x.row(i);
    double mx = kNegInf;
    for (std::size_t c = 0; c < k; ++c) {
      double acc = ln_w[c];
      for (std::size_t j = 0; j < d; ++j) {
        const double delta = row[j] - means[c][j];
        acc += ln_norm[c][j] - 0.5 * delta * delta / variances[c][j];
      }
      ln_p[c] = acc;
      mx = std::max(mx, acc);
    }
    if (!(mx > kNegInf)) throw analysis_error("mixture: zero density point");
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) denom += std::exp(ln_p[c] - mx);
    const double ln_denom = mx + std::log(denom);
    total += ln_denom;
    if (resp)
      for (std::size_t c = 0; c < k; ++c) resp->at(i, c) = std::exp(ln_p[c] - ln_denom);
  }
  return total;
}

int count_effective(const std::vector<double>& weights, double threshold) {
  int count = 0;
  for (double w : weights)
    if (w >= threshold) ++count;
  return count;
}

}  // namespace

void validate_bgmm_config(const BgmmConfig& cfg) {
  if (cfg.k_max < 2) throw config_error("bgmm: k_max must be >= 2");
  if (!(cfg.tol > 0.0)) throw config_error("bgmm: tol must be > 0");
  if (cfg.max_iter < 1) throw config_error("bgmm: max_iter must be >= 1");
  if (cfg.n_init < 1) throw config_error("bgmm: n_init must be >= 1");
  if (!(cfg.mean_precision_prior > 0.0))
    throw config_error("bgmm: mean_precision_prior must be > 0");
  if (!(cfg.dof_prior > 0.0)) throw config_error("bgmm: dof_prior must be > 0");
}

MixtureFit fit_bgmm(const Matrix& x, const BgmmConfig& cfg, double prune_threshold) {
  validate_bgmm_config(cfg);
  validate_data(x);
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  const int k = cfg.k_max;
  if (n < static_cast<std::size_t>(k))
    throw config_error("bgmm: need at least k_max data points");

  const DataStats stats = data_stats(x);
  Priors prior;
  prior.alpha0 = cfg.weight_concentration_prior > 0.0 ? cfg.weight_concentration_prior
                                                      : 1.0 / static_cast<double>(k);
  prior.beta0 = cfg.mean_precision_prior;
  prior.a0 = 0.5 * cfg.dof_prior;
  prior.m0 = cfg.mean_prior.empty() ? stats.mean : cfg.mean_prior;
  if (prior.m0.size() != d) throw config_error("bgmm: mean_prior dimension mismatch");
  prior.b0.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double base = stats.var[j] > 0.0 ? stats.var[j] : 1e-12;
    prior.b0[j] = cfg.scale_prior > 0.0 ? cfg.scale_prior : prior.a0 * base;
  }

  const Rng root(cfg.rng_seed);
  double best_elbo = kNegInf;
  VbState best_state;
  Matrix best_resp;
  std::vector<double> best_history;
  bool best_converged = false;

  for (int restart = 0; restart < cfg.n_init; ++restart) {
    Rng rng = root.fork(static_cast<std::uint64_t>(restart));
    Matrix resp = kmeanspp_init(x, k, rng);
    VbState st;
    m_step(x, resp, prior, st);

    std::vector<double> history;
    history.reserve(64);
    bool converged = false;
    double prev = kNegInf;
    for (int iter = 0; iter < cfg.max_iter; ++iter) {
      resp = e_step(x, st);
      m_step(x, resp, prior, st);
      const double current = elbo(resp, prior, st);
      history.push_back(current);
      if (iter > 0 && std::abs(current - prev) < cfg.tol) {
        converged = true;
        prev = current;
        break;
      }
      prev = current;
    }
    if (prev > best_elbo) {  // strict: ties keep the earlier restart
      best_elbo = prev;
      best_state = st;
      best_resp = resp;
      best_history = history;
      best_converged = converged;
    }
  }

  // Sync responsibilities with the final parameters.
  best_resp = e_step(x, best_state);

  MixtureFit fit;
  const double alpha_sum =
      std::accumulate(best_state.alpha.begin(), best_state.alpha.end(), 0.0);
  fit.weights.resize(k);
  fit.means.assign(k, std::vector<double>(d, 0.0));
  fit.variances.assign(k, std::vector<double>(d, 0.0));
  for (int c = 0; c < k; ++c) {
    fit.weights[c] = best_state.alpha[c] / alpha_sum;
    for (std::size_t j = 0; j < d; ++j) {
      fit.means[c][j] = best_state.m.at(c, j);
      const double floor =
          kVarFloorRatio * (stats.var[j] > 0.0 ? stats.var[j] : 1.0);
      // Posterior-mean precision inverted: E[lambda] = a/b.
      fit.variances[c][j] = std::max(best_state.b.at(c, j) / best_state.a[c], floor);
    }
  }
  fit.responsibilities = std::move(best_resp);
  fit.elbo_history = std::move(best_history);
  fit.converged = best_converged;
  fit.log_likelihood = eval_mixture(x, fit.weights, fit.means, fit.variances, nullptr);
  fit.effective_k = count_effective(fit.weights, prune_threshold);
  return fit;
}

Matrix responsibilities_at(const std::vector<double>& weights,
                           const std::vector<std::vector<double>>& means,
                           const std::vector<std::vector<double>>& variances,
                           const Matrix& x) {
  validate_data(x);
  if (weights.empty()) throw config_error("mixture: no components");
  Matrix resp(x.rows, weights.size());
  eval_mixture(x, weights, means, variances, &resp);
  return resp;
}

Matrix vb_responsibilities_at(const std::vector<double>& alpha,
                              const std::vector<double>& beta,
                              const std::vector<double>& gamma_shape, const Matrix& means,
                              const Matrix& gamma_rate, const Matrix& x) {
  validate_data(x);
  const std::size_t k = alpha.size();
  if (k == 0 || beta.size() != k || gamma_shape.size() != k || means.rows != k ||
      gamma_rate.rows != k || means.cols != x.cols || gamma_rate.cols != x.cols)
    throw config_error("vb responsibilities: parameter sizes disagree");
  for (std::size_t c = 0; c < k; ++c) {
    if (!(alpha[c] > 0.0) || !(beta[c] > 0.0) || !(gamma_shape[c] > 0.0))
      throw config_error("vb responsibilities: parameters must be positive");
    for (std::size_t j = 0; j < x.cols; ++j)
      if (!(gamma_rate.at(c, j) > 0.0))
        throw config_error("vb responsibilities: gamma rates must be positive");
  }
  VbState st;
  st.alpha = alpha;
  st.beta = beta;
  st.a = gamma_shape;
  st.m = means;
  st.b = gamma_rate;
  return e_step(x, st);
}

MixtureFit fit_ml_gmm(const Matrix& x, int k, const BgmmConfig& cfg, const MixtureFit* init) {
  validate_bgmm_config(cfg);
  validate_data(x);
  const std::size_t n = x.rows;
  const std::size_t d = x.cols;
  if (k < 1) throw config_error("ml gmm: k must be >= 1");
  if (n < static_cast<std::size_t>(k)) throw config_error("ml gmm: need at least k points");

  const DataStats stats = data_stats(x);

  MixtureFit fit;
  if (k == 1) {
    // Closed form: mean and population variance per dimension.
    fit.weights = {1.0};
    fit.means = {stats.mean};
    std::vector<double> var(d);
    for (std::size_t j = 0; j < d; ++j) {
      if (!(stats.var[j] > 0.0)) throw analysis_error("ml gmm: zero-variance data");
      var[j] = stats.var[j];
    }
    fit.variances = {var};
    fit.responsibilities = Matrix(n, 1, 1.0);
    double ll = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      ll += -0.5 * static_cast<double>(n) * (kLn2Pi + std::log(var[j]) + 1.0);
    fit.log_likelihood = ll;
    fit.elbo_history = {ll};
    fit.converged = true;
    fit.effective_k = 1;
    return fit;
  }

  std::vector<double> collapse_floor(d);
  for (std::size_t j = 0; j < d; ++j)
    collapse_floor[j] = kCollapseRatio * (stats.var[j] > 0.0 ? stats.var[j] : 1.0);

  const Rng root(cfg.rng_seed);
  for (int attempt = 0; attempt < cfg.n_init; ++attempt) {
    std::vector<double> weights;
    std::vector<std::vector<double>> means, vars;

    const bool warm = attempt == 0 && init != nullptr &&
                      static_cast<int>(init->weights.size()) >= k;
    if (warm) {
      // Seed from the k heaviest components of the variational solution.
      std::vector<std::size_t> order(init->weights.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return init->weights[a] > init->weights[b];
      });
      double total = 0.0;
      for (int c = 0; c < k; ++c) total += init->weights[order[c]];
      for (int c = 0; c < k; ++c) {
        const std::size_t idx = order[c];
        weights.push_back(init->weights[idx] / total);
        means.push_back(init->means[idx]);
        std::vector<double> v = init->variances[idx];
        for (std::size_t j = 0; j < d; ++j) v[j] = std::max(v[j], collapse_floor[j] * 10.0);
        vars.push_back(std::move(v));
      }
    } else {
      Rng rng = root.fork(0x100000ULL + static_cast<std::uint64_t>(attempt));
      Matrix resp = kmeanspp_init(x, k, rng);
      weights.assign(k, 0.0);
      means.assign(k, std::vector<double>(d, 0.0));
      vars.assign(k, std::vector<double>(d, 0.0));
      bool empty_cluster = false;
      for (int c = 0; c < k; ++c) {
        double nk = 0.0;
        for (std::size_t i = 0; i < n; ++i) nk += resp.at(i, c);
        if (nk < 1.0) {
          empty_cluster = true;
          break;
        }
        weights[c] = nk / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
          if (resp.at(i, c) == 0.0) continue;
          const double* row = x.row(i);
          for (std::size_t j = 0; j < d; ++j) means[c][j] += row[j];
        }
        for (std::size_t j = 0; j < d; ++j) means[c][j] /= nk;
        for (std::size_t i = 0; i < n; ++i) {
          if (resp.at(i, c) == 0.0) continue;
          const double* row = x.row(i);
          for (std::size_t j = 0; j < d; ++j) {
            const double delta = row[j] - means[c][j];
            vars[c][j] += delta * delta;
          }
        }
        for (std::size_t j = 0; j < d; ++j) {
          vars[c][j] /= nk;
          // A fresh cluster may be a single point; start it at data scale.
          if (vars[c][j] < collapse_floor[j])
            vars[c][j] = stats.var[j] > 0.0 ? stats.var[j] : 1.0;
        }
      }
      if (empty_cluster) continue;
    }

    Matrix resp(n, k);
    std::vector<double> history;
    history.reserve(64);
    bool collapsed = false;
    bool converged = false;
    double prev = kNegInf;
    for (int iter = 0; iter < cfg.max_iter; ++iter) {
      const double ll = eval_mixture(x, weights, means, vars, &resp);
      history.push_back(ll);
      if (iter > 0 && std::abs(ll - prev) < cfg.tol) {
        converged = true;
        prev = ll;
        break;
      }
      prev = ll;

      // M-step.
      for (int c = 0; c < k; ++c) {
        double nk = 0.0;
        for (std::size_t i = 0; i < n; ++i) nk += resp.at(i, c);
        if (nk < 1e-9) {
          collapsed = true;
          break;
        }
        weights[c] = nk / static_cast<double>(n);
        std::vector<double> mu(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          const double* row = x.row(i);
          const double r = resp.at(i, c);
          for (std::size_t j = 0; j < d; ++j) mu[j] += r * row[j];
        }
        for (std::size_t j = 0; j < d; ++j) mu[j] /= nk;
        std::vector<double> var(d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          const double* row = x.row(i);
          const double r = resp.at(i, c);
          for (std::size_t j = 0; j < d; ++j) {
            const double delta = row[j] - mu[j];
            var[j] += r * delta * delta;
          }
        }
        for (std::size_t j = 0; j < d; ++j) {
          var[j] /= nk;
          if (var[j] < collapse_floor[j]) {
            collapsed = true;
            break;
          }
        }
        if (collapsed) break;
        means[c] = std::move(mu);
        vars[c] = std::move(var);
      }
      if (collapsed) break;
    }
    if (collapsed) continue;

    // Final evaluation so log_likelihood and responsibilities match the
    // returned parameters exactly.
    const double final_ll = eval_mixture(x, weights, means, vars, &resp);
    history.push_back(final_ll);
    fit.weights = std::move(weights);
    fit.means = std::move(means);
    fit.variances = std::move(vars);
    fit.responsibilities = std::move(resp);
    fit.elbo_history = std::move(history);
    fit.log_likelihood = final_ll;
    fit.converged = converged;
    fit.effective_k = count_effective(fit.weights, 0.02);
    return fit;
  }
  throw analysis_error("ml gmm: component collapse in every restart");
}

double bic(const MixtureFit& fit, std::size_t n, int k, int dims) {
  if (n < 1 || k < 1 || dims < 1) throw config_error("bic: invalid arguments");
  const double p = static_cast<double>(k - 1) + static_cast<double>(k) * dims +
                   static_cast<double>(k) * dims * (dims + 1) / 2.0;
  return p * std::log(static_cast<double>(n)) - 2.0 * fit.log_likelihood;
}

nlohmann::json mixture_fit_to_json(const MixtureFit& fit) {
  nlohmann::json doc;
  doc["weights"] = fit.weights;
  doc["means"] = fit.means;
  doc["variances"] = fit.variances;
  doc["elbo"] = fit.elbo_history.empty() ? 0.0 : fit.elbo_history.back();
  doc["n_iterations"] = fit.elbo_history.size();
  doc["log_likelihood"] = fit.log_likelihood;
  doc["converged"] = fit.converged;
  doc["effective_k"] = fit.effective_k;
  return doc;
}

}  // namespace emsift
