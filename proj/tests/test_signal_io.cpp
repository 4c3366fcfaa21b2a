#include <doctest.h>

#include <cstdint>
#include <fstream>
#include <random>

#include "sanitone/errors.hpp"
#include "sanitone/resample.hpp"
#include "sanitone/wav_io.hpp"
#include "support/test_support.hpp"

using namespace sanitone;
using namespace test_support;

namespace {

// Hand-built WAV bytes for header edge cases.
std::string raw_wav(std::uint16_t format_tag, std::uint16_t channels,
                    std::uint32_t rate, std::uint16_t bits,
                    const std::vector<std::int16_t>& pcm) {
  std::string out;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  };
  auto u16 = [&](std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
  };
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(pcm.size() * 2);
  out.append("RIFF");
  u32(36 + data_bytes);
  out.append("WAVE");
  out.append("fmt ");
  u32(16);
  u16(format_tag);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  out.append("data");
  u32(data_bytes);
  for (std::int16_t s : pcm) u16(static_cast<std::uint16_t>(s));
  return out;
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream os(p, std::ios::binary);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("read_wav parses mono PCM16 and scales by 32768") {
  TempDir dir("wav_read");
  const auto path = dir.file("mono.wav");
  std::vector<std::int16_t> pcm(16000, 0);
  pcm[0] = -32768;
  pcm[1] = 16384;
  write_bytes(path, raw_wav(1, 1, 16000, 16, pcm));

  const Waveform w = read_wav(path);
  CHECK(w.size() == 16000);
  CHECK(w.sample_rate_hz == 16000);
  CHECK(w.samples[0] == -1.0);  // -32768 / 32768 exactly
  CHECK(w.samples[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("read_wav rejects stereo") {
  TempDir dir("wav_stereo");
  const auto path = dir.file("stereo.wav");
  write_bytes(path, raw_wav(1, 2, 16000, 16, {0, 0, 0, 0}));
  CHECK_THROWS_AS(read_wav(path), UnsupportedChannels);
}

TEST_CASE("read_wav rejects non-PCM16 and non-RIFF input") {
  TempDir dir("wav_bad");
  const auto float_path = dir.file("float.wav");
  write_bytes(float_path, raw_wav(3, 1, 16000, 16, {0}));
  CHECK_THROWS_AS(read_wav(float_path), FormatError);

  const auto junk_path = dir.file("junk.wav");
  write_bytes(junk_path, "this is not audio at all, definitely not RIFF");
  CHECK_THROWS_AS(read_wav(junk_path), FormatError);

  CHECK_THROWS_AS(read_wav(dir.file("missing.wav")), IoError);
}

TEST_CASE("write_wav round trip stays within one quantization step") {
  TempDir dir("wav_rt");
  const auto path = dir.file("tone.wav");
  const Waveform tone = make_tone(440.0, 0.25, 16000, 0.8);
  write_wav(path, tone);
  const Waveform back = read_wav(path);

  REQUIRE(back.size() == tone.size());
  double max_err = 0.0;
  for (std::size_t i = 0; i < tone.size(); ++i)
    max_err = std::max(max_err, std::fabs(tone.samples[i] - back.samples[i]));
  CHECK(max_err <= 1.0 / 32768.0);
}

TEST_CASE("write_wav clips out-of-range samples") {
  TempDir dir("wav_clip");
  const auto path = dir.file("clip.wav");
  Waveform w;
  w.sample_rate_hz = 16000;
  w.samples = {1.5, -2.0, 0.0};
  write_wav(path, w);
  const Waveform back = read_wav(path);
  CHECK(back.samples[0] == doctest::Approx(32767.0 / 32768.0));
  CHECK(back.samples[1] == -1.0);
  CHECK(back.samples[2] == 0.0);
}

TEST_CASE("write_wav rejects empty signals") {
  TempDir dir("wav_empty");
  Waveform empty;
  empty.sample_rate_hz = 16000;
  CHECK_THROWS_AS(write_wav(dir.file("e.wav"), empty), EmptySignal);
}

TEST_CASE("resample at the same rate is the identity") {
  const Waveform tone = make_tone(300.0, 0.1, 16000);
  const Waveform out = resample(tone, 16000);
  CHECK(out.samples == tone.samples);
  CHECK(out.sample_rate_hz == 16000);
}

TEST_CASE("resample 48k to 16k produces the expected length") {
  const Waveform one_second = make_tone(440.0, 1.0, 48000);
  REQUIRE(one_second.size() == 48000);
  const Waveform out = resample(one_second, 16000);
  CHECK(out.size() == 16000);
  CHECK(out.sample_rate_hz == 16000);
}

TEST_CASE("resample keeps a 440 Hz tone at 440 Hz") {
  const Waveform tone = make_tone(440.0, 1.0, 48000);
  const Waveform out = resample(tone, 16000);
  const double bin_hz = 16000.0 / 4096.0;
  const double peak = dominant_frequency(out.samples, 16000, 4096);
  CHECK(std::fabs(peak - 440.0) <= bin_hz + 1e-9);
}

TEST_CASE("resample passband keeps in-band tone energy, stopband kills aliases") {
  // in-band: 6 kHz survives with >= 99% of its energy at 6 kHz
  const Waveform inband = make_tone(6000.0, 1.0, 48000);
  const Waveform kept = resample(inband, 16000);
  const std::size_t trim = 512;  // skip filter edge transients
  const double at_tone =
      tone_power(kept.samples, 6000.0, 16000, trim, kept.size() - trim);
  const double total = mean_power(kept.samples, trim, kept.size() - trim);
  CHECK(at_tone / total >= 0.99);
  CHECK(at_tone == doctest::Approx(0.5 * 0.5 * 0.5).epsilon(0.02));

  // above target Nyquist: a 10 kHz tone is attenuated by >= 60 dB
  const Waveform alias = make_tone(10000.0, 1.0, 48000);
  const Waveform gone = resample(alias, 16000);
  const double residual = mean_power(gone.samples, trim, gone.size() - trim);
  const double original = mean_power(alias.samples, 0, alias.size());
  CHECK(residual <= 1e-6 * original);
}

TEST_CASE("resampling a pure tone preserves its frequency within one DFT bin") {
  std::mt19937_64 eng(20260810);
  for (int trial = 0; trial < 20; ++trial) {
    const double u = static_cast<double>(eng() >> 11) * 0x1.0p-53;
    const double freq = 100.0 + u * (0.85 * 8000.0 - 100.0);
    const Waveform tone = make_tone(freq, 0.6, 48000);
    const Waveform out = resample(tone, 16000);
    const double bin_hz = 16000.0 / 4096.0;
    const double peak = dominant_frequency(out.samples, 16000, 4096);
    CHECK(std::fabs(peak - freq) <= bin_hz + 1e-9);
  }
}

TEST_CASE("resample twice at a fixed rate equals resampling once") {
  const Waveform noise = make_noise(0.3, 48000, 99);
  const Waveform once = resample(noise, 16000);
  const Waveform twice = resample(once, 16000);
  CHECK(once.samples == twice.samples);
}

TEST_CASE("wav round trip on random signals stays within quantization error") {
  TempDir dir("wav_prop");
  std::mt19937_64 eng(7);
  for (int trial = 0; trial < 5; ++trial) {
    Waveform w;
    w.sample_rate_hz = 16000;
    w.samples.resize(300);
    for (auto& s : w.samples)
      s = 2.0 * (static_cast<double>(eng() >> 11) * 0x1.0p-53) - 1.0;
    const auto path = dir.file("r" + std::to_string(trial) + ".wav");
    write_wav(path, w);
    const Waveform back = read_wav(path);
    for (std::size_t i = 0; i < w.size(); ++i)
      CHECK(std::fabs(w.samples[i] - back.samples[i]) <= 1.0 / 32768.0);
  }
}
