#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace sanitone {

// Mono audio signal. Amplitudes are dimensionless, nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = 0;

  Waveform() = default;
  Waveform(std::vector<double> s, int rate_hz)
      : samples(std::move(s)), sample_rate_hz(rate_hz) {}

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_s() const {
    return sample_rate_hz > 0
               ? static_cast<double>(samples.size()) / sample_rate_hz
               : 0.0;
  }

  bool finite() const {
    for (double s : samples) {
      if (!std::isfinite(s)) return false;
    }
    return true;
  }

  double rms() const {
    if (samples.empty()) return 0.0;
    double acc = 0.0;
    for (double s : samples) acc += s * s;
    return std::sqrt(acc / samples.size());
  }
};

}  // namespace sanitone
