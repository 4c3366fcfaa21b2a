#include "sanitone/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "sanitone/errors.hpp"

namespace sanitone {

double warp_frequency(double omega, double alpha) {
  if (alpha == 0.0) return omega;
  return omega +
         2.0 * std::atan2(alpha * std::sin(omega), 1.0 - alpha * std::cos(omega));
}

namespace {

// Design matrix of the warped cosine basis on the linear bin grid.
// Column weights follow the even-spectrum cepstrum convention: 1 for the
// zeroth and (when present) the Nyquist coefficient, 2 elsewhere.
Matrix cosine_basis(std::size_t bins, int order, double alpha) {
  const std::size_t half = bins - 1;
  Matrix a(bins, static_cast<std::size_t>(order) + 1);
  for (std::size_t j = 0; j < bins; ++j) {
    const double omega = std::numbers::pi * static_cast<double>(j) / half;
    const double warped = warp_frequency(omega, alpha);
    for (int k = 0; k <= order; ++k) {
      const double w =
          (k == 0 || static_cast<std::size_t>(k) == half) ? 1.0 : 2.0;
      a(j, static_cast<std::size_t>(k)) = w * std::cos(k * warped);
    }
  }
  return a;
}

// Cholesky solve of (A^T A) X = A^T, giving the projection onto the basis.
Matrix projection_matrix(const Matrix& a) {
  const std::size_t n = a.cols();
  const std::size_t bins = a.rows();

  Matrix gram(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t r = 0; r < bins; ++r) acc += a(r, i) * a(r, j);
      gram(i, j) = acc;
      gram(j, i) = acc;
    }

  // in-place Cholesky, lower triangle
  Matrix l = gram;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double acc = l(i, j);
      for (std::size_t k = 0; k < j; ++k) acc -= l(i, k) * l(j, k);
      if (i == j) {
        l(i, i) = std::sqrt(std::max(acc, 1e-300));
      } else {
        l(i, j) = acc / l(j, j);
      }
    }
  }

  // solve L L^T X = A^T column by column
  Matrix solve(n, bins);
  std::vector<double> y(n), x(n);
  for (std::size_t col = 0; col < bins; ++col) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = a(col, i);
      for (std::size_t k = 0; k < i; ++k) acc -= l(i, k) * y[k];
      y[i] = acc / l(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double acc = y[i];
      for (std::size_t k = i + 1; k < n; ++k) acc -= l(k, i) * x[k];
      x[i] = acc / l(i, i);
      solve(i, col) = x[i];
    }
  }
  return solve;
}

}  // namespace

McepSequence sp_to_mcep(const Matrix& sp, int order, double alpha) {
  if (sp.empty()) {
    McepSequence m;
    m.coeffs = Matrix(0, static_cast<std::size_t>(order) + 1);
    m.order = order;
    m.alpha = alpha;
    return m;
  }
  for (double v : sp.data())
    if (!(v > 0.0))
      throw NonPositiveEnvelope("spectral envelope must be strictly positive");

  const Matrix proj = projection_matrix(cosine_basis(sp.cols(), order, alpha));

  McepSequence m;
  m.order = order;
  m.alpha = alpha;
  m.coeffs = Matrix(sp.rows(), static_cast<std::size_t>(order) + 1);
  std::vector<double> log_env(sp.cols());
  for (std::size_t f = 0; f < sp.rows(); ++f) {
    const auto row = sp.row(f);
    for (std::size_t j = 0; j < sp.cols(); ++j) log_env[j] = std::log(row[j]);
    for (std::size_t k = 0; k < m.coeffs.cols(); ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < sp.cols(); ++j) acc += proj(k, j) * log_env[j];
      m.coeffs(f, k) = acc;
    }
  }
  return m;
}

McepSequence sp_to_mcep(const Matrix& sp, const FeatureConfig& cfg) {
  return sp_to_mcep(sp, cfg.order, cfg.alpha);
}

Matrix mcep_to_sp(const McepSequence& m, int fft_size) {
  const std::size_t bins = static_cast<std::size_t>(fft_size) / 2 + 1;
  const Matrix basis = cosine_basis(bins, m.order, m.alpha);

  Matrix sp(m.frames(), bins);
  for (std::size_t f = 0; f < m.frames(); ++f) {
    const auto coeffs = m.coeffs.row(f);
    for (std::size_t j = 0; j < bins; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < coeffs.size(); ++k) acc += basis(j, k) * coeffs[k];
      sp(f, j) = std::exp(acc);
    }
  }
  return sp;
}

F0Stats compute_f0_stats(std::span<const F0Track> tracks) {
  std::vector<double> logs;
  for (const auto& t : tracks)
    for (double v : t.values_hz)
      if (v > 0.0) logs.push_back(std::log(v));

  if (logs.size() < 2)
    throw InsufficientVoicedFrames("need at least 2 voiced frames, got " +
                                   std::to_string(logs.size()));

  // fixed summation order makes the stats exactly permutation-invariant
  std::sort(logs.begin(), logs.end());

  double mean = 0.0;
  for (double v : logs) mean += v;
  mean /= static_cast<double>(logs.size());
  double var = 0.0;
  for (double v : logs) var += (v - mean) * (v - mean);
  var /= static_cast<double>(logs.size());

  F0Stats s;
  s.mean_log_f0 = mean;
  s.std_log_f0 = std::max(std::sqrt(var), kStdFloor);
  s.voiced_frame_count = logs.size();
  return s;
}

F0Track convert_log_f0(const F0Track& track, const F0Stats& src,
                       const F0Stats& tgt) {
  F0Track out = track;
  if (src.mean_log_f0 == tgt.mean_log_f0 && src.std_log_f0 == tgt.std_log_f0)
    return out;
  const double ratio = tgt.std_log_f0 / src.std_log_f0;
  for (double& v : out.values_hz) {
    if (v <= 0.0) continue;  // unvoiced stays unvoiced
    v = std::exp((std::log(v) - src.mean_log_f0) * ratio + tgt.mean_log_f0);
  }
  return out;
}

FeatureStats compute_feature_stats(std::span<const McepSequence> corpus) {
  FeatureStats s;
  if (corpus.empty()) return s;
  const std::size_t dims = corpus.front().width();
  s.mean.assign(dims, 0.0);
  s.stddev.assign(dims, 0.0);

  std::size_t total = 0;
  for (const auto& m : corpus) {
    if (m.width() != dims)
      throw DimensionMismatch("feature widths differ across the corpus");
    for (std::size_t f = 0; f < m.frames(); ++f) {
      const auto row = m.coeffs.row(f);
      for (std::size_t d = 0; d < dims; ++d) s.mean[d] += row[d];
    }
    total += m.frames();
  }
  if (total == 0) return s;
  for (double& v : s.mean) v /= static_cast<double>(total);

  for (const auto& m : corpus)
    for (std::size_t f = 0; f < m.frames(); ++f) {
      const auto row = m.coeffs.row(f);
      for (std::size_t d = 0; d < dims; ++d) {
        const double diff = row[d] - s.mean[d];
        s.stddev[d] += diff * diff;
      }
    }
  for (double& v : s.stddev)
    v = std::max(std::sqrt(v / static_cast<double>(total)), kStdFloor);
  return s;
}

namespace {

McepSequence apply_affine(const McepSequence& m, const FeatureStats& s,
                          bool forward) {
  if (m.width() != s.dims())
    throw DimensionMismatch("feature width " + std::to_string(m.width()) +
                            " does not match stats dimension " +
                            std::to_string(s.dims()));
  McepSequence out = m;
  for (std::size_t f = 0; f < m.frames(); ++f)
    for (std::size_t d = 0; d < m.width(); ++d) {
      const double v = m.coeffs(f, d);
      out.coeffs(f, d) = forward ? (v - s.mean[d]) / s.stddev[d]
                                 : v * s.stddev[d] + s.mean[d];
    }
  return out;
}

}  // namespace

McepSequence normalize(const McepSequence& m, const FeatureStats& s) {
  return apply_affine(m, s, true);
}

McepSequence denormalize(const McepSequence& m, const FeatureStats& s) {
  return apply_affine(m, s, false);
}

}  // namespace sanitone
