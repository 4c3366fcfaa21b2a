#pragma once

#include <span>
#include <vector>

#include "sanitone/matrix.hpp"
#include "sanitone/vocoder.hpp"

namespace sanitone {

struct FeatureConfig {
  int order = 24;       // mel-cepstral order; coefficients per frame = order + 1
  double alpha = 0.42;  // all-pass warping constant for 16 kHz
  // when set, c0 bypasses the conversion network and passes through unchanged
  bool energy_passthrough = false;
};

// Mel-cepstral coding of a spectral-envelope sequence.
struct McepSequence {
  Matrix coeffs;  // frames x (order + 1)
  int order = 24;
  double alpha = 0.42;

  std::size_t frames() const { return coeffs.rows(); }
  std::size_t width() const { return coeffs.cols(); }
};

// Corpus statistics of the natural log of voiced F0 values.
struct F0Stats {
  double mean_log_f0 = 0.0;
  double std_log_f0 = 1.0;
  std::size_t voiced_frame_count = 0;
};

// Per-dimension mean/std over a feature corpus; std floored at kStdFloor.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t dims() const { return mean.size(); }
};

inline constexpr double kStdFloor = 1e-6;

// First-order all-pass frequency warp (and its inverse via -alpha).
double warp_frequency(double omega, double alpha);

// Least-squares fit of a warped cosine basis to the log power envelope.
// Throws NonPositiveEnvelope.
McepSequence sp_to_mcep(const Matrix& sp, int order, double alpha);
McepSequence sp_to_mcep(const Matrix& sp, const FeatureConfig& cfg);

// Evaluates the truncated warped cosine series back onto linear bins.
Matrix mcep_to_sp(const McepSequence& m, int fft_size);

// Mean/std of ln(F0) over voiced frames only. Throws InsufficientVoicedFrames
// when fewer than two voiced frames exist in total.
F0Stats compute_f0_stats(std::span<const F0Track> tracks);

// Log-Gaussian transform of the voiced values; the voicing pattern is
// preserved exactly, and src == tgt is the identity.
F0Track convert_log_f0(const F0Track& track, const F0Stats& src,
                       const F0Stats& tgt);

FeatureStats compute_feature_stats(std::span<const McepSequence> corpus);

// Per-dimension z-score and its inverse. Throws DimensionMismatch.
McepSequence normalize(const McepSequence& m, const FeatureStats& s);
McepSequence denormalize(const McepSequence& m, const FeatureStats& s);

}  // namespace sanitone
