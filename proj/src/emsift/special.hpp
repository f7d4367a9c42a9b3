#pragma once

namespace emsift {

// Digamma function psi(x) for x > 0. Recurrence lift plus asymptotic series;
// absolute error below 1e-12 over the range used here.
double digamma(double x);

// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a),
// a > 0, x >= 0. Series expansion for x < a + 1, continued fraction otherwise.
double regularized_gamma_p(double a, double x);

// Chi-squared CDF with k degrees of freedom.
double chi2_cdf(double x, int k);

// Quantile of the chi-squared distribution via bisection on the CDF.
double chi2_quantile(int k, double prob);

}  // namespace emsift
