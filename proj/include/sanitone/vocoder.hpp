#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>

#include "sanitone/matrix.hpp"
#include "sanitone/waveform.hpp"

namespace sanitone {

struct VocoderConfig {
  double frame_period_ms = 5.0;
  int fft_size = 1024;          // power of two
  double f0_floor_hz = 71.0;
  double f0_ceil_hz = 800.0;

  void validate() const;  // throws InvalidAnalysis on a broken invariant
  std::size_t bins() const { return static_cast<std::size_t>(fft_size) / 2 + 1; }
};

// Per-frame pitch track. 0.0 encodes an unvoiced frame.
struct F0Track {
  std::vector<double> values_hz;
  double frame_period_ms = 5.0;

  std::size_t frames() const { return values_hz.size(); }
  std::size_t voiced_count() const;
  bool voiced(std::size_t frame) const { return values_hz[frame] > 0.0; }
};

// Frame-level decomposition: pitch, spectral envelope (power spectrum,
// strictly positive) and per-bin aperiodicity in [0, 1].
struct AnalysisResult {
  F0Track f0;
  Matrix spectral_envelope;  // frames x (fft_size/2 + 1)
  Matrix aperiodicity;       // frames x (fft_size/2 + 1)
  int sample_rate_hz = 0;
  int fft_size = 0;

  std::size_t frames() const { return f0.frames(); }
  void validate() const;  // throws InvalidAnalysis
};

// Envelope floor guaranteeing strict positivity for log/cepstral transforms.
inline constexpr double kEnvelopeFloor = 1e-12;

// Frame count for a signal of n samples under cfg.
std::size_t frame_count(std::size_t n_samples, int sample_rate_hz,
                        const VocoderConfig& cfg);

// Pitch estimation: normalized-autocorrelation candidates over low-passed
// bands with continuity-based selection. Throws TooShort.
F0Track estimate_f0(const Waveform& w, const VocoderConfig& cfg);

// Smooth power envelope via pitch-adaptive windowing and cepstral liftering.
// Throws FrameMismatch when f0 does not match the framing of w under cfg.
Matrix estimate_spectral_envelope(const Waveform& w, const F0Track& f0,
                                  const VocoderConfig& cfg);

// Band-wise harmonic-to-residual energy ratio, interpolated to bins.
// Unvoiced frames are 1.0 by convention. Throws FrameMismatch.
Matrix estimate_aperiodicity(const Waveform& w, const F0Track& f0,
                             const VocoderConfig& cfg);

// Composition of the three estimators.
AnalysisResult analyze(const Waveform& w, const VocoderConfig& cfg);

// Excitation (pulse train mixed with noise, weighted by aperiodicity) shaped
// by a minimum-phase filter built from the spectral envelope.
// Throws InvalidAnalysis when a's invariants do not hold.
Waveform synthesize(const AnalysisResult& a);

// Flat binary dump: header (frame count, bins, rates) followed by
// little-endian 64-bit-float matrices, row-major, F0 then SP then AP.
void save_analysis(const std::filesystem::path& path, const AnalysisResult& a);
AnalysisResult load_analysis(const std::filesystem::path& path);
void save_analysis(std::ostream& os, const AnalysisResult& a);
AnalysisResult load_analysis(std::istream& is, const std::string& context);

}  // namespace sanitone
