// Independent reference implementations used only by tests. Deliberately
// naive and written straight from textbook definitions so they share no code
// (and no bugs) with the library under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace oracle {

// O(n^2) direct-sum discrete Fourier transform. The inverse carries the 1/n
// factor, matching the library convention.
inline std::vector<std::complex<double>> naive_dft(
    const std::vector<std::complex<double>>& x, bool inverse = false) {
  const std::size_t n = x.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      double angle = sign * 2.0 * M_PI * static_cast<double>(k) *
                     static_cast<double>(j) / static_cast<double>(n);
      acc += x[j] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    out[k] = inverse ? acc / static_cast<double>(n) : acc;
  }
  return out;
}

struct EigenResult {
  std::vector<double> values;                // descending
  std::vector<std::vector<double>> vectors;  // vectors[j] pairs with values[j]
};

// Cyclic Jacobi rotations for a symmetric matrix; converges quadratically and
// is trivially auditable, which is the point of an oracle.
inline EigenResult jacobi_eigen(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  std::vector<std::vector<double>> v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;

  for (int sweep = 0; sweep < 200; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        double phi = 0.5 * std::atan2(2.0 * a[p][q], a[q][q] - a[p][p]);
        double c = std::cos(phi), s = std::sin(phi);
        for (std::size_t i = 0; i < n; ++i) {
          double aip = a[i][p], aiq = a[i][q];
          a[i][p] = c * aip - s * aiq;
          a[i][q] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          double api = a[p][i], aqi = a[q][i];
          a[p][i] = c * api - s * aqi;
          a[q][i] = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          double vip = v[i][p], viq = v[i][q];
          v[i][p] = c * vip - s * viq;
          v[i][q] = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return a[i][i] > a[j][j]; });

  EigenResult out;
  out.values.resize(n);
  out.vectors.assign(n, std::vector<double>(n));
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a[order[j]][order[j]];
    for (std::size_t i = 0; i < n; ++i) out.vectors[j][i] = v[i][order[j]];
  }
  return out;
}

// Composite Simpson rule over [a, b] with n panels (n made even).
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2 != 0) ++n;
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Closed-form chi-square CDFs for 1 and 2 degrees of freedom.
inline double chi2_cdf_dim1(double x) { return std::erf(std::sqrt(x / 2.0)); }
inline double chi2_cdf_dim2(double x) { return 1.0 - std::exp(-x / 2.0); }

inline double normal_pdf(double x, double mu, double var) {
  return std::exp(-0.5 * (x - mu) * (x - mu) / var) / std::sqrt(2.0 * M_PI * var);
}

// Bhattacharyya distance between two 1-D Gaussians straight from the
// definition: -ln integral sqrt(f1(x) f2(x)) dx, by quadrature over a range
// wide enough that the truncated tails are negligible at 1e-10.
inline double bhattacharyya_quadrature(double mu1, double var1, double mu2, double var2) {
  double lo = std::min(mu1 - 12.0 * std::sqrt(var1), mu2 - 12.0 * std::sqrt(var2));
  double hi = std::max(mu1 + 12.0 * std::sqrt(var1), mu2 + 12.0 * std::sqrt(var2));
  double bc = simpson(
      [&](double x) { return std::sqrt(normal_pdf(x, mu1, var1) * normal_pdf(x, mu2, var2)); },
      lo, hi, 20000);
  return -std::log(bc);
}

}  // namespace oracle
