#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "sanitone/vocoder.hpp"
#include "sanitone/waveform.hpp"

namespace sanitone::vocoder_detail {

// F0 assumed for unvoiced frames when a window length or pulse rate is needed.
inline constexpr double kDefaultF0 = 160.0;

inline double hop_samples(int sample_rate_hz, const VocoderConfig& cfg) {
  return sample_rate_hz * cfg.frame_period_ms / 1000.0;
}

inline long frame_center(std::size_t frame, double hop) {
  return std::lround(static_cast<double>(frame) * hop);
}

// Sample with zero padding outside the signal.
inline double sample_at(const std::vector<double>& x, long i) {
  return (i < 0 || i >= static_cast<long>(x.size())) ? 0.0 : x[static_cast<std::size_t>(i)];
}

// Zero-phase FIR lowpass (Hann-windowed sinc), odd tap count.
std::vector<double> lowpass(const std::vector<double>& x, double cutoff_hz,
                            int sample_rate_hz, int taps = 129);

void require_frame_match(const Waveform& w, const F0Track& f0,
                         const VocoderConfig& cfg);

}  // namespace sanitone::vocoder_detail
