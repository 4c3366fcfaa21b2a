#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "sanitone/detail/fft.hpp"
#include "sanitone/detail/rng.hpp"
#include "sanitone/errors.hpp"
#include "sanitone/vocoder.hpp"
#include "vocoder_internal.hpp"

namespace sanitone {

namespace {

constexpr double kSafeguard = 1e-12;

// Minimum-phase impulse response from a half log-amplitude spectrum.
// Returns the complex half spectrum exp(H(z)) with H the folded cepstrum.
std::vector<std::complex<double>> minimum_phase_spectrum(
    const std::vector<double>& log_amplitude, int fft_size) {
  const std::size_t n = static_cast<std::size_t>(fft_size);
  const std::size_t half = n / 2;

  std::vector<std::complex<double>> half_spec(half + 1);
  for (std::size_t k = 0; k <= half; ++k) half_spec[k] = log_amplitude[k];
  const std::vector<double> cepstrum = detail::irfft(half_spec, n);

  std::vector<std::complex<double>> folded(n, {0.0, 0.0});
  folded[0] = cepstrum[0];
  for (std::size_t q = 1; q < half; ++q) folded[q] = 2.0 * cepstrum[q];
  folded[half] = cepstrum[half];
  detail::fft_inplace(folded, false);

  std::vector<std::complex<double>> out(half + 1);
  for (std::size_t k = 0; k <= half; ++k) out[k] = std::exp(folded[k]);
  return out;
}

// Linear interpolation of one analysis row at a fractional frame position.
void interp_row(const Matrix& m, double frame_pos, std::vector<double>& out) {
  const std::size_t last = m.rows() - 1;
  const double clamped = std::clamp(frame_pos, 0.0, static_cast<double>(last));
  const std::size_t lo = static_cast<std::size_t>(clamped);
  const std::size_t hi = std::min(lo + 1, last);
  const double t = clamped - static_cast<double>(lo);
  const auto row_lo = m.row(lo);
  const auto row_hi = m.row(hi);
  for (std::size_t k = 0; k < m.cols(); ++k)
    out[k] = (1.0 - t) * row_lo[k] + t * row_hi[k];
}

}  // namespace

Waveform synthesize(const AnalysisResult& a) {
  a.validate();

  const int fs = a.sample_rate_hz;
  const int fft_size = a.fft_size;
  const std::size_t half = static_cast<std::size_t>(fft_size) / 2;
  const std::size_t bins = half + 1;
  const std::size_t n_frames = a.frames();
  const double hop = fs * a.f0.frame_period_ms / 1000.0;

  const long out_len =
      std::lround(static_cast<double>(n_frames - 1) * hop) + 1;
  Waveform out;
  out.sample_rate_hz = fs;
  out.samples.assign(static_cast<std::size_t>(out_len), 0.0);

  // per-sample pitch and voicing, pitch defaulted where unvoiced
  std::vector<double> f0_per_sample(static_cast<std::size_t>(out_len));
  std::vector<char> voiced_per_sample(static_cast<std::size_t>(out_len));
  for (long i = 0; i < out_len; ++i) {
    const double frame_pos = static_cast<double>(i) / hop;
    const std::size_t lo =
        std::min(static_cast<std::size_t>(frame_pos), n_frames - 1);
    const std::size_t hi = std::min(lo + 1, n_frames - 1);
    const double t = std::min(frame_pos - static_cast<double>(lo), 1.0);
    const double v_lo = a.f0.voiced(lo) ? 1.0 : 0.0;
    const double v_hi = a.f0.voiced(hi) ? 1.0 : 0.0;
    const bool voiced = (1.0 - t) * v_lo + t * v_hi > 0.5;
    double f = (1.0 - t) * a.f0.values_hz[lo] + t * a.f0.values_hz[hi];
    if (!voiced || f <= 0.0) f = vocoder_detail::kDefaultF0;
    f0_per_sample[static_cast<std::size_t>(i)] = f;
    voiced_per_sample[static_cast<std::size_t>(i)] = voiced ? 1 : 0;
  }

  // excitation time base: phase-wrap positions of the running pitch phase
  struct Pulse {
    long index;
    double fractional_shift;
  };
  std::vector<Pulse> pulses;
  double total_phase = 0.0, prev_wrapped = 0.0;
  const double two_pi = 2.0 * std::numbers::pi;
  for (long i = 0; i < out_len; ++i) {
    total_phase += two_pi * f0_per_sample[static_cast<std::size_t>(i)] / fs;
    const double wrapped = std::fmod(total_phase, two_pi);
    if (i > 0 && std::fabs(wrapped - prev_wrapped) > std::numbers::pi) {
      const double y1 = prev_wrapped - two_pi;
      const double y2 = wrapped;
      const double x = y2 != y1 ? -y1 / (y2 - y1) : 0.0;
      pulses.push_back({i - 1, x / fs});
    }
    prev_wrapped = wrapped;
  }
  if (pulses.empty()) pulses.push_back({0, 0.0});

  // Hann-shaped DC remover for the periodic response
  std::vector<double> dc_remover(static_cast<std::size_t>(fft_size), 0.0);
  {
    double dc_sum = 0.0;
    for (std::size_t i = 0; i < half; ++i) {
      dc_remover[i] = 0.5 - 0.5 * std::cos(two_pi * (i + 1.0) / (1.0 + fft_size));
      dc_sum += dc_remover[i];
    }
    for (std::size_t i = 0; i < half; ++i) {
      dc_remover[i] /= 2.0 * dc_sum;
      dc_remover[static_cast<std::size_t>(fft_size) - i - 1] = dc_remover[i];
    }
  }

  detail::Rng noise_rng(0x5a17707e);
  std::vector<double> envelope_row(bins), ap_row(bins), log_amp(bins);
  std::vector<double> response(static_cast<std::size_t>(fft_size));

  for (std::size_t p = 0; p < pulses.size(); ++p) {
    const long pulse_index = pulses[p].index;
    const long next_index =
        p + 1 < pulses.size() ? pulses[p + 1].index : out_len - 1;
    const int noise_size = std::max<long>(1, next_index - pulse_index);

    const double frame_pos = static_cast<double>(pulse_index) / hop;
    interp_row(a.spectral_envelope, frame_pos, envelope_row);
    interp_row(a.aperiodicity, frame_pos, ap_row);
    for (double& v : ap_row) v = std::clamp(v, 0.0, 0.999999999999);

    const bool voiced = voiced_per_sample[static_cast<std::size_t>(pulse_index)] != 0;
    std::fill(response.begin(), response.end(), 0.0);

    if (voiced) {
      // periodic response: impulse through the minimum-phase envelope filter
      for (std::size_t k = 0; k < bins; ++k)
        log_amp[k] =
            0.5 * std::log(envelope_row[k] * (1.0 - ap_row[k]) + kSafeguard);
      auto spectrum = minimum_phase_spectrum(log_amp, fft_size);
      // fractional delay keeps pulse spacing exact below one sample
      const double coeff = two_pi * pulses[p].fractional_shift * fs / fft_size;
      for (std::size_t k = 0; k <= half; ++k) {
        const double re = std::cos(coeff * static_cast<double>(k));
        const double im = -std::sqrt(std::max(0.0, 1.0 - re * re));
        spectrum[k] *= std::complex<double>(re, im);
      }
      std::vector<double> periodic = detail::irfft(spectrum, static_cast<std::size_t>(fft_size));

      // fftshift and DC removal
      double dc = 0.0;
      for (std::size_t i = half; i < static_cast<std::size_t>(fft_size); ++i)
        dc += periodic[i];
      const double scale = std::sqrt(static_cast<double>(noise_size));
      for (std::size_t i = 0; i < static_cast<std::size_t>(fft_size); ++i) {
        const std::size_t shifted = (i + half) % static_cast<std::size_t>(fft_size);
        response[i] += (periodic[shifted] - dc * dc_remover[i]) * scale;
      }
    }

    // aperiodic response: white noise segment through the noise-band filter
    for (std::size_t k = 0; k < bins; ++k) {
      const double noise_power =
          voiced ? envelope_row[k] * ap_row[k] : envelope_row[k];
      log_amp[k] = 0.5 * std::log(noise_power + kSafeguard);
    }
    auto noise_filter = minimum_phase_spectrum(log_amp, fft_size);

    std::vector<double> noise(static_cast<std::size_t>(fft_size), 0.0);
    double noise_mean = 0.0;
    for (int i = 0; i < noise_size && i < fft_size; ++i) {
      noise[static_cast<std::size_t>(i)] = noise_rng.gauss();
      noise_mean += noise[static_cast<std::size_t>(i)];
    }
    noise_mean /= std::min(noise_size, fft_size);
    for (int i = 0; i < noise_size && i < fft_size; ++i)
      noise[static_cast<std::size_t>(i)] -= noise_mean;

    auto noise_spec = detail::rfft(noise, static_cast<std::size_t>(fft_size));
    for (std::size_t k = 0; k <= half; ++k) noise_spec[k] *= noise_filter[k];
    std::vector<double> aperiodic = detail::irfft(noise_spec, static_cast<std::size_t>(fft_size));
    for (std::size_t i = 0; i < static_cast<std::size_t>(fft_size); ++i) {
      const std::size_t shifted = (i + half) % static_cast<std::size_t>(fft_size);
      response[i] += aperiodic[shifted];
    }

    // overlap-add centered on the pulse
    const long base = pulse_index - static_cast<long>(half);
    for (std::size_t i = 0; i < static_cast<std::size_t>(fft_size); ++i) {
      const long idx = base + static_cast<long>(i);
      if (idx >= 0 && idx < out_len)
        out.samples[static_cast<std::size_t>(idx)] += response[i];
    }
  }
  return out;
}

}  // namespace sanitone
