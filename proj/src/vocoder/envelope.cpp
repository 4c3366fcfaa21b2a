#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "sanitone/detail/fft.hpp"
#include "sanitone/errors.hpp"
#include "sanitone/vocoder.hpp"
#include "vocoder_internal.hpp"

namespace sanitone {

namespace {

using vocoder_detail::sample_at;

// Rectangular smoothing of the power spectrum, window width_hz wide, with
// mirrored boundaries. Operates via a prefix sum over fractional bin spans.
std::vector<double> smooth_power(const std::vector<double>& p, double width_hz,
                                 double bin_hz) {
  const int bins = static_cast<int>(p.size());
  const double half_width = 0.5 * width_hz / bin_hz;  // in bins
  if (half_width <= 0.25) return p;

  auto mirrored = [&](int i) {
    if (i < 0) i = -i;
    const int period = 2 * (bins - 1);
    i %= period;
    return p[static_cast<std::size_t>(i < bins ? i : period - i)];
  };

  const int pad = static_cast<int>(half_width) + 2;
  std::vector<double> prefix(static_cast<std::size_t>(bins + 2 * pad) + 1, 0.0);
  for (int i = 0; i < bins + 2 * pad; ++i)
    prefix[static_cast<std::size_t>(i) + 1] =
        prefix[static_cast<std::size_t>(i)] + mirrored(i - pad);

  auto integral = [&](double x) {
    // integral of the piecewise-constant sequence over [-pad, x)
    const double shifted = std::clamp(x + pad, 0.0, static_cast<double>(bins + 2 * pad));
    const int whole = static_cast<int>(shifted);
    const double frac = shifted - whole;
    double v = prefix[static_cast<std::size_t>(whole)];
    if (whole < bins + 2 * pad) v += frac * mirrored(whole - pad);
    return v;
  };

  std::vector<double> out(p.size());
  for (int i = 0; i < bins; ++i) {
    const double lo = i - half_width;
    const double hi = i + half_width;
    out[static_cast<std::size_t>(i)] = (integral(hi) - integral(lo)) / (2.0 * half_width);
  }
  return out;
}

}  // namespace

Matrix estimate_spectral_envelope(const Waveform& w, const F0Track& f0,
                                  const VocoderConfig& cfg) {
  cfg.validate();
  vocoder_detail::require_frame_match(w, f0, cfg);

  const int fft_size = cfg.fft_size;
  const std::size_t bins = cfg.bins();
  const double fs = w.sample_rate_hz;
  const double hop = vocoder_detail::hop_samples(w.sample_rate_hz, cfg);
  const double bin_hz = fs / fft_size;

  Matrix envelope(f0.frames(), bins);
  std::vector<double> windowed(static_cast<std::size_t>(fft_size));

  // lifter weights are f0-dependent; quefrency axis in seconds
  const std::size_t half = static_cast<std::size_t>(fft_size) / 2;
  std::vector<double> log_power(bins);
  std::vector<std::complex<double>> spectrum_buf;

  // shape-recovery strength for the cepstral lifter
  constexpr double kRecovery = -0.15;

  for (std::size_t frame = 0; frame < f0.frames(); ++frame) {
    const double f = f0.voiced(frame) ? f0.values_hz[frame] : vocoder_detail::kDefaultF0;
    const long center = vocoder_detail::frame_center(frame, hop);

    // pitch-adaptive window, 3 periods long
    int half_win = static_cast<int>(std::lround(1.5 * fs / f));
    half_win = std::min(half_win, fft_size / 2 - 1);
    std::fill(windowed.begin(), windowed.end(), 0.0);
    double win_energy = 0.0;
    const int win_len = 2 * half_win + 1;
    for (int i = 0; i < win_len; ++i) {
      const double win =
          0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 1) / (win_len + 1));
      win_energy += win * win;
    }
    const double win_scale = 1.0 / std::sqrt(win_energy);
    for (int i = 0; i < win_len; ++i) {
      const double win =
          0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (i + 1) / (win_len + 1));
      windowed[static_cast<std::size_t>(i)] =
          sample_at(w.samples, center - half_win + i) * win * win_scale;
    }

    auto spec = detail::rfft(windowed, static_cast<std::size_t>(fft_size));
    std::vector<double> power(bins);
    for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(spec[k]);

    // harmonic-interval smoothing on the linear axis, then log
    power = smooth_power(power, (2.0 / 3.0) * f, bin_hz);
    for (std::size_t k = 0; k < bins; ++k)
      log_power[k] = std::log(power[k] + 1e-300);

    // cepstral liftering: keep the sub-harmonic quefrency region, recover
    // peak sharpness lost to the smoothing above
    std::vector<std::complex<double>> half_spec(bins);
    for (std::size_t k = 0; k < bins; ++k) half_spec[k] = log_power[k];
    std::vector<double> cepstrum = detail::irfft(half_spec, static_cast<std::size_t>(fft_size));

    std::vector<std::complex<double>> lifted(static_cast<std::size_t>(fft_size));
    for (std::size_t q = 0; q <= half; ++q) {
      const double t = static_cast<double>(q) / fs;
      const double x = std::numbers::pi * f * t;
      const double smooth_lifter = q == 0 ? 1.0 : std::sin(x) / x;
      const double recovery_lifter =
          (1.0 - 2.0 * kRecovery) + 2.0 * kRecovery * std::cos(2.0 * x);
      const double v = cepstrum[q] * smooth_lifter * recovery_lifter;
      lifted[q] = v;
      if (q > 0 && q < half) lifted[static_cast<std::size_t>(fft_size) - q] = v;
    }
    detail::fft_inplace(lifted, false);

    for (std::size_t k = 0; k < bins; ++k)
      envelope(frame, k) = std::max(std::exp(lifted[k].real()), kEnvelopeFloor);
  }
  return envelope;
}

}  // namespace sanitone
