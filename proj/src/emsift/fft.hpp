#pragma once

#include <complex>
#include <vector>

namespace emsift {

using cdouble = std::complex<double>;

// In-place FFT for any length >= 1. Radix-2 for powers of two, Bluestein
// otherwise. Forward uses exp(-2*pi*i*nk/N); inverse includes the 1/N factor.
// Thread-safe and deterministic (twiddle tables are cached behind a mutex).
void fft_inplace(std::vector<cdouble>& a, bool inverse);

std::vector<cdouble> fft(std::vector<cdouble> a);
std::vector<cdouble> ifft(std::vector<cdouble> a);
std::vector<cdouble> fft_real(const std::vector<double>& x);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

// FFT bin centre frequency in Hz for bin k of an N-point transform.
// Bins above N/2 map to negative frequencies.
double fft_bin_freq(std::size_t k, std::size_t n, double sampling_rate);

}  // namespace emsift
