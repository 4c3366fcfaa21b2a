#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace sanitone::detail {

// In-place iterative radix-2 FFT. Size must be a power of two.
// The inverse transform divides by n.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

// Real-input FFT: x (zero padded to n) -> n/2 + 1 half spectrum.
std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t n);

// Inverse of rfft: half spectrum (n/2 + 1 bins) -> n real samples.
std::vector<double> irfft(std::span<const std::complex<double>> half,
                          std::size_t n);

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace sanitone::detail
