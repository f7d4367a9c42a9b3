#include "emsift/fft.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace emsift {

namespace {

// Half-table of forward twiddles exp(-2*pi*i*k/N), k in [0, N/2).
// Cached per transform size; the pipeline reuses a handful of sizes heavily.
std::shared_ptr<const std::vector<cdouble>> twiddle_table(std::size_t n) {
  static std::mutex mtx;
  static std::map<std::size_t, std::shared_ptr<const std::vector<cdouble>>> cache;
  std::lock_guard<std::mutex> lock(mtx);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  auto table = std::make_shared<std::vector<cdouble>>(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    (*table)[k] = cdouble(std::cos(ang), std::sin(ang));
  }
  cache[n] = table;
  return table;
}

void fft_radix2(std::vector<cdouble>& a, bool inverse) {
  const std::size_t n = a.size();
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  auto table = twiddle_table(n);
  const std::vector<cdouble>& tw = *table;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        cdouble w = tw[k * step];
        if (inverse) w = std::conj(w);
        cdouble u = a[i + k];
        cdouble v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
  if (inverse) {
    double inv_n = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv_n;
  }
}

// Bluestein's algorithm: re-express the DFT as a convolution of chirped
// sequences and evaluate it with a power-of-two FFT.
void fft_bluestein(std::vector<cdouble>& a, bool inverse) {
  const std::size_t n = a.size();
  const std::size_t m = next_power_of_two(2 * n - 1);
  const double sign = inverse ? 1.0 : -1.0;

  // chirp[k] = exp(sign * i * pi * k^2 / n); k^2 mod 2n keeps the angle exact.
  std::vector<cdouble> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t k2 = (k * k) % (2 * n);
    double ang = sign * std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
    chirp[k] = cdouble(std::cos(ang), std::sin(ang));
  }

  std::vector<cdouble> u(m, cdouble(0, 0));
  std::vector<cdouble> v(m, cdouble(0, 0));
  for (std::size_t k = 0; k < n; ++k) u[k] = a[k] * chirp[k];
  v[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) {
    v[k] = std::conj(chirp[k]);
    v[m - k] = std::conj(chirp[k]);
  }

  fft_radix2(u, false);
  fft_radix2(v, false);
  for (std::size_t k = 0; k < m; ++k) u[k] *= v[k];
  fft_radix2(u, true);

  for (std::size_t k = 0; k < n; ++k) a[k] = u[k] * chirp[k];
  if (inverse) {
    double inv_n = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv_n;
  }
}

}  // namespace

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_inplace(std::vector<cdouble>& a, bool inverse) {
  if (a.empty()) throw std::invalid_argument("fft: empty input");
  if (a.size() == 1) return;
  if (is_power_of_two(a.size())) {
    fft_radix2(a, inverse);
  } else {
    fft_bluestein(a, inverse);
  }
}

std::vector<cdouble> fft(std::vector<cdouble> a) {
  fft_inplace(a, false);
  return a;
}

std::vector<cdouble> ifft(std::vector<cdouble> a) {
  fft_inplace(a, true);
  return a;
}

std::vector<cdouble> fft_real(const std::vector<double>& x) {
  std::vector<cdouble> a(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = cdouble(x[i], 0.0);
  fft_inplace(a, false);
  return a;
}

double fft_bin_freq(std::size_t k, std::size_t n, double sampling_rate) {
  double f = static_cast<double>(k) / static_cast<double>(n) * sampling_rate;
  if (k > n / 2) f -= sampling_rate;
  return f;
}

}  // namespace emsift
