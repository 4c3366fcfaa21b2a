#include "sanitone/detail/fft.hpp"

#include <cassert>
#include <cmath>
#include <numbers>

namespace sanitone::detail {

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  assert(is_power_of_two(n));
  if (n < 2) return;

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double angle =
        (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(angle), std::sin(angle));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }

  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : a) v *= scale;
  }
}

std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t n) {
  assert(is_power_of_two(n));
  std::vector<std::complex<double>> buf(n, {0.0, 0.0});
  const std::size_t m = x.size() < n ? x.size() : n;
  for (std::size_t i = 0; i < m; ++i) buf[i] = {x[i], 0.0};
  fft_inplace(buf, false);
  buf.resize(n / 2 + 1);
  return buf;
}

std::vector<double> irfft(std::span<const std::complex<double>> half,
                          std::size_t n) {
  assert(is_power_of_two(n));
  assert(half.size() == n / 2 + 1);
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i <= n / 2; ++i) buf[i] = half[i];
  for (std::size_t i = n / 2 + 1; i < n; ++i) buf[i] = std::conj(half[n - i]);
  fft_inplace(buf, true);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = buf[i].real();
  return out;
}

}  // namespace sanitone::detail
