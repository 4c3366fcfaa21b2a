#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "sanitone/errors.hpp"
#include "sanitone/features.hpp"
#include "support/synthetic_voice.hpp"

using namespace sanitone;
using namespace test_support;

namespace {

// Direct DFT cepstrum of the even-extended log envelope (no warping).
std::vector<double> dft_cepstrum_oracle(std::span<const double> log_env,
                                        int fft_size) {
  const int half = fft_size / 2;
  std::vector<double> full(static_cast<std::size_t>(fft_size));
  for (int j = 0; j < fft_size; ++j)
    full[static_cast<std::size_t>(j)] = log_env[static_cast<std::size_t>(
        j <= half ? j : fft_size - j)];
  std::vector<double> ceps(static_cast<std::size_t>(half) + 1, 0.0);
  for (int q = 0; q <= half; ++q) {
    double acc = 0.0;
    for (int j = 0; j < fft_size; ++j)
      acc += full[static_cast<std::size_t>(j)] *
             std::cos(2.0 * std::numbers::pi * q * j / fft_size);
    ceps[static_cast<std::size_t>(q)] = acc / fft_size;
  }
  return ceps;
}

// Smooth formant-shaped power envelope built from resonator responses.
Matrix formant_envelope(std::size_t frames, int fft_size, int fs,
                        const std::vector<Resonance>& formants,
                        double level = 1e-3) {
  const std::size_t bins = static_cast<std::size_t>(fft_size) / 2 + 1;
  std::vector<Resonator> chain;
  for (const auto& f : formants) chain.emplace_back(f.freq_hz, f.bandwidth_hz, fs);
  Matrix sp(frames, bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const double freq = static_cast<double>(k) * fs / fft_size;
    double p = level;
    for (const auto& r : chain) p *= (r.power_response(freq, fs) + 1e-4);
    for (std::size_t f = 0; f < frames; ++f) sp(f, k) = p;
  }
  return sp;
}

double median_lsd_db(const Matrix& a, const Matrix& b) {
  std::vector<double> per_frame;
  for (std::size_t f = 0; f < a.rows(); ++f) {
    double acc = 0.0;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double d = 10.0 * std::log10(a(f, k) / b(f, k));
      acc += d * d;
    }
    per_frame.push_back(std::sqrt(acc / a.cols()));
  }
  std::sort(per_frame.begin(), per_frame.end());
  return per_frame[per_frame.size() / 2];
}

}  // namespace

TEST_CASE("flat envelope codes to c0 = log level, higher coefficients zero") {
  const double level = 0.37;
  Matrix sp(3, 513, level);
  const McepSequence m = sp_to_mcep(sp, 24, 0.42);
  REQUIRE(m.width() == 25);
  for (std::size_t f = 0; f < 3; ++f) {
    CHECK(std::fabs(m.coeffs(f, 0) - std::log(level)) <= 1e-6);
    for (std::size_t k = 1; k < 25; ++k) CHECK(std::fabs(m.coeffs(f, k)) <= 1e-6);
  }
}

TEST_CASE("alpha 0 at full order equals the direct DFT cepstrum") {
  const int fft_size = 1024;
  const int fs = 16000;
  const Matrix sp = formant_envelope(2, fft_size, fs, {{700.0, 130.0}, {2300.0, 260.0}});
  const McepSequence m = sp_to_mcep(sp, fft_size / 2, 0.0);

  std::vector<double> log_env(sp.cols());
  for (std::size_t k = 0; k < sp.cols(); ++k) log_env[k] = std::log(sp(0, k));
  const std::vector<double> oracle = dft_cepstrum_oracle(log_env, fft_size);

  for (std::size_t k = 0; k <= fft_size / 2; ++k)
    CHECK(std::fabs(m.coeffs(0, k) - oracle[k]) <= 1e-8 * (1.0 + std::fabs(oracle[k])));
}

TEST_CASE("coding round trip keeps smooth envelopes within 1.5 dB") {
  const int fft_size = 1024;
  const int fs = 16000;
  const Matrix sp = formant_envelope(
      4, fft_size, fs, {{600.0, 110.0}, {1750.0, 190.0}, {3100.0, 320.0}});
  const McepSequence m = sp_to_mcep(sp, 24, 0.42);
  const Matrix back = mcep_to_sp(m, fft_size);
  CHECK(median_lsd_db(sp, back) <= 1.5);
}

TEST_CASE("coding the reconstruction again is idempotent") {
  const int fft_size = 1024;
  const Matrix sp = formant_envelope(2, fft_size, 16000, {{900.0, 150.0}, {2500.0, 280.0}});
  const McepSequence m1 = sp_to_mcep(sp, 24, 0.42);
  const Matrix back = mcep_to_sp(m1, fft_size);
  const McepSequence m2 = sp_to_mcep(back, 24, 0.42);
  for (std::size_t f = 0; f < m1.frames(); ++f)
    for (std::size_t k = 0; k < m1.width(); ++k)
      CHECK(std::fabs(m1.coeffs(f, k) - m2.coeffs(f, k)) <= 1e-6);
}

TEST_CASE("mcep_to_sp closed forms") {
  McepSequence m;
  m.order = 24;
  m.alpha = 0.42;
  m.coeffs = Matrix(2, 25, 0.0);
  SUBCASE("all-zero coefficients give an all-ones envelope") {
    const Matrix sp = mcep_to_sp(m, 1024);
    for (double v : sp.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("only c0 = log 4 gives a flat envelope of 4") {
    m.coeffs(0, 0) = std::log(4.0);
    m.coeffs(1, 0) = std::log(4.0);
    const Matrix sp = mcep_to_sp(m, 1024);
    for (double v : sp.data()) CHECK(v == doctest::Approx(4.0).epsilon(1e-12));
  }
}

TEST_CASE("sp_to_mcep rejects non-positive envelopes") {
  Matrix sp(2, 513, 1.0);
  sp(1, 5) = 0.0;
  CHECK_THROWS_AS(sp_to_mcep(sp, 24, 0.42), NonPositiveEnvelope);
}

TEST_CASE("compute_f0_stats closed forms and the two-pass oracle") {
  SUBCASE("constant 200 Hz corpus") {
    F0Track t;
    t.values_hz.assign(50, 200.0);
    const F0Stats s = compute_f0_stats(std::vector<F0Track>{t});
    CHECK(s.mean_log_f0 == doctest::Approx(std::log(200.0)).epsilon(1e-12));
    CHECK(s.std_log_f0 == kStdFloor);
    CHECK(s.voiced_frame_count == 50);
  }
  SUBCASE("half 100 Hz, half 400 Hz") {
    F0Track t;
    t.values_hz.assign(20, 100.0);
    t.values_hz.insert(t.values_hz.end(), 20, 400.0);
    const F0Stats s = compute_f0_stats(std::vector<F0Track>{t});
    CHECK(s.mean_log_f0 ==
          doctest::Approx((std::log(100.0) + std::log(400.0)) / 2.0).epsilon(1e-12));
  }
  SUBCASE("random corpus matches a direct two-pass computation") {
    std::mt19937_64 eng(5);
    std::vector<F0Track> tracks(3);
    std::vector<double> logs;
    for (auto& t : tracks) {
      t.values_hz.resize(100);
      for (auto& v : t.values_hz) {
        const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
        v = u < 0.3 ? 0.0 : 80.0 + u * 300.0;
        if (v > 0.0) logs.push_back(std::log(v));
      }
    }
    double mean = 0.0;
    for (double v : logs) mean += v;
    mean /= logs.size();
    double var = 0.0;
    for (double v : logs) var += (v - mean) * (v - mean);
    const double stddev = std::sqrt(var / logs.size());

    const F0Stats s = compute_f0_stats(tracks);
    CHECK(std::fabs(s.mean_log_f0 - mean) <= 1e-12);
    CHECK(std::fabs(s.std_log_f0 - stddev) <= 1e-12);
    CHECK(s.voiced_frame_count == logs.size());
  }
  SUBCASE("frame order does not matter") {
    F0Track a, b;
    a.values_hz = {100.0, 0.0, 150.0, 220.0, 330.0};
    b.values_hz = {330.0, 220.0, 0.0, 150.0, 100.0};
    const F0Stats sa = compute_f0_stats(std::vector<F0Track>{a});
    const F0Stats sb = compute_f0_stats(std::vector<F0Track>{b});
    CHECK(sa.mean_log_f0 == sb.mean_log_f0);
    CHECK(sa.std_log_f0 == sb.std_log_f0);
  }
  SUBCASE("fewer than two voiced frames is an error") {
    F0Track t;
    t.values_hz = {0.0, 0.0, 120.0};
    CHECK_THROWS_AS(compute_f0_stats(std::vector<F0Track>{t}),
                    InsufficientVoicedFrames);
  }
}

TEST_CASE("convert_log_f0 identity, closed form, and inverse") {
  F0Track t;
  t.values_hz = {100.0, 0.0, 250.0, 131.0, 0.0, 419.5};
  t.frame_period_ms = 5.0;

  SUBCASE("src == tgt is exactly the identity") {
    F0Stats s{std::log(180.0), 0.3, 100};
    const F0Track out = convert_log_f0(t, s, s);
    CHECK(out.values_hz == t.values_hz);
  }
  SUBCASE("closed-form shift of the mean") {
    F0Stats src{std::log(100.0), 1.0, 10};
    F0Stats tgt{std::log(200.0), 1.0, 10};
    const F0Track out = convert_log_f0(t, src, tgt);
    CHECK(out.values_hz[0] == doctest::Approx(200.0).epsilon(1e-12));
    CHECK(out.values_hz[1] == 0.0);
  }
  SUBCASE("convert then inverse-convert returns the original") {
    F0Stats src{std::log(140.0), 0.25, 50};
    F0Stats tgt{std::log(210.0), 0.40, 50};
    const F0Track there = convert_log_f0(t, src, tgt);
    const F0Track back = convert_log_f0(there, tgt, src);
    for (std::size_t i = 0; i < t.values_hz.size(); ++i) {
      if (t.values_hz[i] == 0.0) {
        CHECK(back.values_hz[i] == 0.0);
      } else {
        CHECK(std::fabs(back.values_hz[i] - t.values_hz[i]) / t.values_hz[i] <= 1e-9);
      }
    }
  }
  SUBCASE("voicing mask is preserved exactly") {
    F0Stats src{std::log(140.0), 0.25, 50};
    F0Stats tgt{std::log(90.0), 0.55, 50};
    const F0Track out = convert_log_f0(t, src, tgt);
    for (std::size_t i = 0; i < t.values_hz.size(); ++i)
      CHECK((out.values_hz[i] > 0.0) == (t.values_hz[i] > 0.0));
  }
}

TEST_CASE("normalize/denormalize round trip and edge cases") {
  std::mt19937_64 eng(17);
  McepSequence m;
  m.order = 4;
  m.coeffs = Matrix(30, 5);
  for (auto& v : m.coeffs.data())
    v = 10.0 * (static_cast<double>(eng() >> 11) * 0x1.0p-53) - 5.0;

  SUBCASE("stats mean 0 std 1 is the identity") {
    FeatureStats s;
    s.mean.assign(5, 0.0);
    s.stddev.assign(5, 1.0);
    const McepSequence out = normalize(m, s);
    CHECK(out.coeffs == m.coeffs);
  }
  SUBCASE("round trip within 1e-9") {
    const FeatureStats s = compute_feature_stats(std::vector<McepSequence>{m});
    const McepSequence back = denormalize(normalize(m, s), s);
    double max_err = 0.0;
    for (std::size_t i = 0; i < m.coeffs.size(); ++i)
      max_err = std::max(max_err,
                         std::fabs(back.coeffs.data()[i] - m.coeffs.data()[i]));
    CHECK(max_err <= 1e-9);
  }
  SUBCASE("single-frame corpus floors the std") {
    McepSequence one;
    one.order = 4;
    one.coeffs = Matrix(1, 5, 3.25);
    const FeatureStats s = compute_feature_stats(std::vector<McepSequence>{one});
    for (double v : s.stddev) CHECK(v == kStdFloor);
    const McepSequence z = normalize(one, s);
    for (double v : z.coeffs.data()) CHECK(std::isfinite(v));
  }
  SUBCASE("width mismatch is an error") {
    FeatureStats s;
    s.mean.assign(7, 0.0);
    s.stddev.assign(7, 1.0);
    CHECK_THROWS_AS(normalize(m, s), DimensionMismatch);
  }
}
