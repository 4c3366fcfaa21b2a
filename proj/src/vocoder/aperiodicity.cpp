#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "sanitone/detail/fft.hpp"
#include "sanitone/errors.hpp"
#include "sanitone/vocoder.hpp"
#include "vocoder_internal.hpp"

namespace sanitone {

namespace {

using vocoder_detail::sample_at;

// Normalized autocorrelation of seg at a fractional lag, correlation span n.
double periodicity_at(const std::vector<double>& seg, double lag, int n) {
  const int lag0 = static_cast<int>(lag);
  const double frac = lag - lag0;
  auto nccf = [&](int l) {
    double cross = 0.0, e0 = 0.0, e1 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = seg[static_cast<std::size_t>(i)];
      const double b = seg[static_cast<std::size_t>(i + l)];
      cross += a * b;
      e0 += a * a;
      e1 += b * b;
    }
    const double denom = std::sqrt(e0 * e1);
    return denom > 0.0 ? cross / denom : 0.0;
  };
  const double r0 = nccf(lag0);
  if (frac == 0.0) return r0;
  return r0 + frac * (nccf(lag0 + 1) - r0);
}

}  // namespace

Matrix estimate_aperiodicity(const Waveform& w, const F0Track& f0,
                             const VocoderConfig& cfg) {
  cfg.validate();
  vocoder_detail::require_frame_match(w, f0, cfg);

  const std::size_t bins = cfg.bins();
  const double fs = w.sample_rate_hz;
  const double hop = vocoder_detail::hop_samples(w.sample_rate_hz, cfg);

  Matrix ap(f0.frames(), bins, 1.0);

  // analysis bands: edges as fractions of the sample rate
  const double edges_frac[] = {0.0, 1.0 / 16, 1.0 / 8, 1.0 / 4, 3.0 / 8, 0.5};
  constexpr int n_bands = 5;
  double centers_hz[n_bands];
  for (int b = 0; b < n_bands; ++b)
    centers_hz[b] = 0.5 * (edges_frac[b] + edges_frac[b + 1]) * fs;

  constexpr int kSegFft = 512;
  const int corr_len = kSegFft / 2;

  for (std::size_t frame = 0; frame < f0.frames(); ++frame) {
    if (!f0.voiced(frame)) continue;  // unvoiced stays 1.0 by convention

    const double lag = fs / f0.values_hz[frame];
    if (lag + corr_len + 1 >= kSegFft) continue;

    const long center = vocoder_detail::frame_center(frame, hop);
    std::vector<double> seg(kSegFft);
    double mean = 0.0;
    for (int i = 0; i < kSegFft; ++i) {
      seg[static_cast<std::size_t>(i)] = sample_at(w.samples, center - kSegFft / 2 + i);
      mean += seg[static_cast<std::size_t>(i)];
    }
    mean /= kSegFft;
    for (double& v : seg) v -= mean;

    const double full_band = periodicity_at(seg, lag, corr_len);

    auto spec = detail::rfft(seg, kSegFft);
    double total_energy = 1e-300;
    for (const auto& c : spec) total_energy += std::norm(c);

    double band_ap[n_bands];
    for (int b = 0; b < n_bands; ++b) {
      const std::size_t k_lo =
          static_cast<std::size_t>(edges_frac[b] * kSegFft);
      const std::size_t k_hi =
          static_cast<std::size_t>(edges_frac[b + 1] * kSegFft);
      std::vector<std::complex<double>> masked(spec.size(), {0.0, 0.0});
      double band_energy = 0.0;
      for (std::size_t k = k_lo; k < std::min(k_hi, masked.size()); ++k) {
        masked[k] = spec[k];
        band_energy += std::norm(spec[k]);
      }
      double r;
      if (band_energy < 0.01 * total_energy) {
        // negligible band energy: inherit the broadband periodicity
        r = full_band;
      } else {
        const std::vector<double> band_signal = detail::irfft(masked, kSegFft);
        r = periodicity_at(band_signal, lag, corr_len);
      }
      band_ap[b] = std::clamp(1.0 - r, 0.0, 1.0);
    }

    // interpolate band values onto spectrum bins
    const double bin_hz = fs / cfg.fft_size;
    for (std::size_t k = 0; k < bins; ++k) {
      const double freq = k * bin_hz;
      double value;
      if (freq <= centers_hz[0]) {
        value = band_ap[0];
      } else if (freq >= centers_hz[n_bands - 1]) {
        value = band_ap[n_bands - 1];
      } else {
        int b = 0;
        while (freq > centers_hz[b + 1]) ++b;
        const double t = (freq - centers_hz[b]) / (centers_hz[b + 1] - centers_hz[b]);
        value = band_ap[b] + t * (band_ap[b + 1] - band_ap[b]);
      }
      ap(frame, k) = value;
    }
  }
  return ap;
}

}  // namespace sanitone
