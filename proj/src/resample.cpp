#include "sanitone/resample.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

namespace sanitone {

namespace {

// zeroth-order modified Bessel function of the first kind
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double half_x = 0.5 * x;
  for (int k = 1; k < 64; ++k) {
    term *= (half_x / k) * (half_x / k);
    sum += term;
    if (term < 1e-14 * sum) break;
  }
  return sum;
}

// Lowpass prototype at the upsampled rate: Kaiser windowed sinc with gain
// upsample_factor, cutoff/transition placed for a 60 dB stopband at the
// smaller of the two Nyquist frequencies.
std::vector<double> design_lowpass(int upsample, int decimate) {
  constexpr double kStopbandDb = 60.0;
  const double beta = 0.1102 * (kStopbandDb - 8.7);
  const double omega_stop =
      std::numbers::pi / static_cast<double>(std::max(upsample, decimate));
  const double omega_cut = 0.95 * omega_stop;
  const double transition = 0.10 * omega_stop;

  int taps = static_cast<int>(
                 std::ceil((kStopbandDb - 7.95) / (2.285 * transition))) +
             1;
  if (taps % 2 == 0) ++taps;

  std::vector<double> h(taps);
  const int center = (taps - 1) / 2;
  const double i0_beta = bessel_i0(beta);
  for (int i = 0; i < taps; ++i) {
    const int m = i - center;
    const double sinc = m == 0 ? omega_cut / std::numbers::pi
                               : std::sin(omega_cut * m) /
                                     (std::numbers::pi * m);
    const double t = 2.0 * i / (taps - 1) - 1.0;
    const double window = bessel_i0(beta * std::sqrt(1.0 - t * t)) / i0_beta;
    h[i] = upsample * sinc * window;
  }
  return h;
}

}  // namespace

Waveform resample(const Waveform& w, int target_hz) {
  if (target_hz == w.sample_rate_hz || w.empty()) {
    Waveform out = w;
    out.sample_rate_hz = target_hz;
    return out;
  }

  const int g = std::gcd(w.sample_rate_hz, target_hz);
  const int upsample = target_hz / g;
  const int decimate = w.sample_rate_hz / g;

  const std::vector<double> h = design_lowpass(upsample, decimate);
  const int taps = static_cast<int>(h.size());
  const int delay = (taps - 1) / 2;

  const long long in_len = static_cast<long long>(w.size());
  const long long out_len =
      (2 * in_len * upsample + decimate) / (2 * decimate);

  Waveform out;
  out.sample_rate_hz = target_hz;
  out.samples.resize(static_cast<std::size_t>(out_len), 0.0);

  for (long long n = 0; n < out_len; ++n) {
    // position in the conceptual upsampled stream, group delay removed
    const long long u = n * decimate + delay;
    long long j_lo = (u - taps + 1 + upsample - 1) / upsample;
    long long j_hi = u / upsample;
    j_lo = std::max<long long>(j_lo, 0);
    j_hi = std::min<long long>(j_hi, in_len - 1);
    double acc = 0.0;
    for (long long j = j_lo; j <= j_hi; ++j) {
      acc += w.samples[static_cast<std::size_t>(j)] *
             h[static_cast<std::size_t>(u - j * upsample)];
    }
    out.samples[static_cast<std::size_t>(n)] = acc;
  }
  return out;
}

}  // namespace sanitone
