#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include "sanitone/errors.hpp"
#include "sanitone/vocoder.hpp"
#include "vocoder_internal.hpp"

namespace sanitone {

namespace vocoder_detail {

std::vector<double> lowpass(const std::vector<double>& x, double cutoff_hz,
                            int sample_rate_hz, int taps) {
  const double nyquist = sample_rate_hz / 2.0;
  if (cutoff_hz >= nyquist) return x;
  const double wc = std::numbers::pi * cutoff_hz / nyquist;
  const int half = taps / 2;
  std::vector<double> h(taps);
  for (int i = 0; i < taps; ++i) {
    const int m = i - half;
    const double sinc =
        m == 0 ? wc / std::numbers::pi : std::sin(wc * m) / (std::numbers::pi * m);
    const double win =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (taps - 1));
    h[i] = sinc * win;
  }
  const double gain = std::accumulate(h.begin(), h.end(), 0.0);
  for (double& v : h) v /= gain;

  std::vector<double> y(x.size(), 0.0);
  const long n = static_cast<long>(x.size());
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int k = 0; k < taps; ++k) acc += h[k] * sample_at(x, i + half - k);
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

void require_frame_match(const Waveform& w, const F0Track& f0,
                         const VocoderConfig& cfg) {
  if (f0.frames() != frame_count(w.size(), w.sample_rate_hz, cfg))
    throw FrameMismatch("F0 track has " + std::to_string(f0.frames()) +
                        " frames, signal expects " +
                        std::to_string(frame_count(w.size(), w.sample_rate_hz, cfg)));
}

}  // namespace vocoder_detail

namespace {

using vocoder_detail::sample_at;

struct Candidate {
  double f0 = 0.0;
  double score = 0.0;  // refined NCCF peak value, lag-weighted
};

// Normalized cross-correlation peaks of one band around a frame center.
void collect_candidates(const std::vector<double>& band, long center, int corr_len,
                        int lag_min, int lag_max, double fs, double f0_floor,
                        double f0_ceil, std::vector<Candidate>& out) {
  const long start = center - (corr_len + lag_max) / 2;
  const int total = corr_len + lag_max;

  std::vector<double> seg(static_cast<std::size_t>(total));
  double mean = 0.0;
  for (int i = 0; i < total; ++i) mean += sample_at(band, start + i);
  mean /= total;
  for (int i = 0; i < total; ++i)
    seg[static_cast<std::size_t>(i)] = sample_at(band, start + i) - mean;

  double e_base = 0.0;
  for (int i = 0; i < corr_len; ++i) e_base += seg[i] * seg[i];
  double e_lag = 0.0;
  for (int i = lag_min; i < lag_min + corr_len; ++i) e_lag += seg[i] * seg[i];

  if (e_base <= 0.0) return;

  std::vector<double> nccf(static_cast<std::size_t>(lag_max - lag_min + 1), 0.0);
  for (int lag = lag_min; lag <= lag_max; ++lag) {
    double cross = 0.0;
    for (int i = 0; i < corr_len; ++i) cross += seg[i] * seg[i + lag];
    const double denom = std::sqrt(e_base * e_lag);
    nccf[static_cast<std::size_t>(lag - lag_min)] =
        denom > 0.0 ? cross / denom : 0.0;
    if (lag < lag_max) {
      e_lag += seg[lag + corr_len] * seg[lag + corr_len] - seg[lag] * seg[lag];
    }
  }

  constexpr double kPeakFloor = 0.3;
  for (int lag = lag_min + 1; lag < lag_max; ++lag) {
    const double y0 = nccf[static_cast<std::size_t>(lag - lag_min - 1)];
    const double y1 = nccf[static_cast<std::size_t>(lag - lag_min)];
    const double y2 = nccf[static_cast<std::size_t>(lag - lag_min + 1)];
    if (y1 < kPeakFloor || y1 < y0 || y1 < y2) continue;
    // period-multiple suppression: a comparable peak at half the lag means
    // this lag is a subharmonic of the true period
    const int half_lag = lag / 2;
    if (half_lag >= lag_min) {
      double half_peak = nccf[static_cast<std::size_t>(half_lag - lag_min)];
      if (half_lag + 1 <= lag_max)
        half_peak = std::max(
            half_peak, nccf[static_cast<std::size_t>(half_lag + 1 - lag_min)]);
      if (half_lag - 1 >= lag_min)
        half_peak = std::max(
            half_peak, nccf[static_cast<std::size_t>(half_lag - 1 - lag_min)]);
      if (half_peak >= 0.95 * y1) continue;
    }
    // parabolic lag refinement
    const double denom = y0 - 2.0 * y1 + y2;
    double delta = denom != 0.0 ? 0.5 * (y0 - y2) / denom : 0.0;
    delta = std::clamp(delta, -0.5, 0.5);
    const double lag_refined = lag + delta;
    const double peak = y1 - 0.25 * (y0 - y2) * delta;
    const double f0 = fs / lag_refined;
    if (f0 < f0_floor || f0 > f0_ceil) continue;
    // slight preference for shorter lags breaks period-multiple ties
    const double lag_weight = 1.0 - 0.05 * lag_refined / lag_max;
    out.push_back({f0, std::min(1.0, peak) * lag_weight});
  }
}

}  // namespace

F0Track estimate_f0(const Waveform& w, const VocoderConfig& cfg) {
  cfg.validate();
  const double fs = w.sample_rate_hz;
  const double hop = vocoder_detail::hop_samples(w.sample_rate_hz, cfg);
  if (static_cast<double>(w.size()) < hop)
    throw TooShort("signal shorter than two frames");

  const std::size_t n_frames = frame_count(w.size(), w.sample_rate_hz, cfg);
  const int lag_min = std::max(2, static_cast<int>(fs / cfg.f0_ceil_hz));
  const int lag_max = static_cast<int>(std::ceil(fs / cfg.f0_floor_hz)) + 1;
  const int corr_len = lag_max;

  // candidate generation over two low-passed bands
  const std::vector<double> band_a =
      vocoder_detail::lowpass(w.samples, std::min(1.2 * cfg.f0_ceil_hz, fs / 2.0),
                              w.sample_rate_hz);
  const std::vector<double> band_b =
      vocoder_detail::lowpass(w.samples, std::min(2.5 * cfg.f0_ceil_hz, fs / 2.0),
                              w.sample_rate_hz);

  constexpr std::size_t kMaxCandidates = 6;
  constexpr double kSilenceRms = 1e-5;
  std::vector<std::vector<Candidate>> candidates(n_frames);
  for (std::size_t frame = 0; frame < n_frames; ++frame) {
    const long center = vocoder_detail::frame_center(frame, hop);
    double energy = 0.0;
    for (int i = -corr_len / 2; i < corr_len / 2; ++i) {
      const double s = sample_at(w.samples, center + i);
      energy += s * s;
    }
    if (std::sqrt(energy / corr_len) < kSilenceRms) continue;

    auto& cands = candidates[frame];
    collect_candidates(band_a, center, corr_len, lag_min, lag_max, fs,
                       cfg.f0_floor_hz, cfg.f0_ceil_hz, cands);
    collect_candidates(band_b, center, corr_len, lag_min, lag_max, fs,
                       cfg.f0_floor_hz, cfg.f0_ceil_hz, cands);
    std::sort(cands.begin(), cands.end(),
              [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    if (cands.size() > kMaxCandidates) cands.resize(kMaxCandidates);
  }

  // continuity-based selection: Viterbi over candidates plus an unvoiced state
  constexpr double kUnvoicedCost = 0.42;
  constexpr double kVoicingSwitchCost = 0.15;
  constexpr double kOctaveWeight = 0.6;

  struct Node {
    double cost = std::numeric_limits<double>::infinity();
    int prev = -1;
  };
  // state 0 is unvoiced, states 1.. are candidates of the frame
  std::vector<std::vector<Node>> trellis(n_frames);
  for (std::size_t frame = 0; frame < n_frames; ++frame)
    trellis[frame].resize(1 + candidates[frame].size());

  trellis[0][0].cost = kUnvoicedCost;
  for (std::size_t s = 1; s < trellis[0].size(); ++s)
    trellis[0][s].cost = 1.0 - candidates[0][s - 1].score;

  for (std::size_t frame = 1; frame < n_frames; ++frame) {
    const auto& prev_cands = candidates[frame - 1];
    for (std::size_t s = 0; s < trellis[frame].size(); ++s) {
      const bool voiced = s > 0;
      const double emit =
          voiced ? 1.0 - candidates[frame][s - 1].score : kUnvoicedCost;
      for (std::size_t p = 0; p < trellis[frame - 1].size(); ++p) {
        const bool prev_voiced = p > 0;
        double trans = 0.0;
        if (voiced && prev_voiced) {
          trans = kOctaveWeight *
                  std::fabs(std::log2(candidates[frame][s - 1].f0 /
                                      prev_cands[p - 1].f0));
        } else if (voiced != prev_voiced) {
          trans = kVoicingSwitchCost;
        }
        const double total = trellis[frame - 1][p].cost + trans + emit;
        if (total < trellis[frame][s].cost) {
          trellis[frame][s].cost = total;
          trellis[frame][s].prev = static_cast<int>(p);
        }
      }
    }
  }

  F0Track track;
  track.frame_period_ms = cfg.frame_period_ms;
  track.values_hz.assign(n_frames, 0.0);

  std::size_t best = 0;
  for (std::size_t s = 1; s < trellis[n_frames - 1].size(); ++s)
    if (trellis[n_frames - 1][s].cost < trellis[n_frames - 1][best].cost) best = s;
  for (std::size_t frame = n_frames; frame-- > 0;) {
    if (best > 0) {
      const double f0 = candidates[frame][best - 1].f0;
      track.values_hz[frame] = std::clamp(f0, cfg.f0_floor_hz, cfg.f0_ceil_hz);
    }
    if (frame > 0) best = static_cast<std::size_t>(trellis[frame][best].prev);
  }
  return track;
}

}  // namespace sanitone
