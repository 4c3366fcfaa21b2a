#include <cstdint>
#include <cstring>
#include <fstream>

#include "sanitone/detail/fft.hpp"
#include "sanitone/errors.hpp"
#include "sanitone/vocoder.hpp"

namespace sanitone {

void VocoderConfig::validate() const {
  if (frame_period_ms <= 0.0)
    throw InvalidAnalysis("frame_period_ms must be positive");
  if (fft_size < 512 || !detail::is_power_of_two(static_cast<std::size_t>(fft_size)))
    throw InvalidAnalysis("fft_size must be a power of two >= 512");
  if (f0_floor_hz <= 0.0 || f0_floor_hz >= f0_ceil_hz)
    throw InvalidAnalysis("need 0 < f0_floor_hz < f0_ceil_hz");
}

std::size_t F0Track::voiced_count() const {
  std::size_t n = 0;
  for (double v : values_hz)
    if (v > 0.0) ++n;
  return n;
}

void AnalysisResult::validate() const {
  const std::size_t n = f0.frames();
  const std::size_t bins = static_cast<std::size_t>(fft_size) / 2 + 1;
  if (n == 0) throw InvalidAnalysis("no frames");
  if (sample_rate_hz <= 0) throw InvalidAnalysis("bad sample rate");
  if (fft_size <= 0 || !detail::is_power_of_two(static_cast<std::size_t>(fft_size)))
    throw InvalidAnalysis("fft_size must be a power of two");
  if (spectral_envelope.rows() != n || aperiodicity.rows() != n)
    throw InvalidAnalysis("frame counts differ across F0/SP/AP");
  if (spectral_envelope.cols() != bins || aperiodicity.cols() != bins)
    throw InvalidAnalysis("bin count does not match fft_size");
  for (double v : spectral_envelope.data())
    if (!(v > 0.0)) throw InvalidAnalysis("spectral envelope must be strictly positive");
  for (double v : aperiodicity.data())
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidAnalysis("aperiodicity outside [0, 1]");
  for (double v : f0.values_hz)
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidAnalysis("bad F0 value");
}

std::size_t frame_count(std::size_t n_samples, int sample_rate_hz,
                        const VocoderConfig& cfg) {
  const double hop = sample_rate_hz * cfg.frame_period_ms / 1000.0;
  return static_cast<std::size_t>(static_cast<double>(n_samples) / hop) + 1;
}

AnalysisResult analyze(const Waveform& w, const VocoderConfig& cfg) {
  AnalysisResult a;
  a.f0 = estimate_f0(w, cfg);
  a.spectral_envelope = estimate_spectral_envelope(w, a.f0, cfg);
  a.aperiodicity = estimate_aperiodicity(w, a.f0, cfg);
  a.sample_rate_hz = w.sample_rate_hz;
  a.fft_size = cfg.fft_size;
  return a;
}

namespace {

constexpr char kMagic[4] = {'S', 'A', 'N', 'A'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& is, const std::string& context) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(v)))
    throw CorruptFile(context + ": truncated analysis dump");
  return v;
}

}  // namespace

void save_analysis(std::ostream& os, const AnalysisResult& a) {
  a.validate();
  os.write(kMagic, 4);
  write_pod(os, kVersion);
  write_pod(os, static_cast<std::uint64_t>(a.frames()));
  write_pod(os, static_cast<std::uint64_t>(a.spectral_envelope.cols()));
  write_pod(os, static_cast<std::uint32_t>(a.sample_rate_hz));
  write_pod(os, static_cast<std::uint32_t>(a.fft_size));
  write_pod(os, a.f0.frame_period_ms);
  os.write(reinterpret_cast<const char*>(a.f0.values_hz.data()),
           static_cast<std::streamsize>(a.frames() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(a.spectral_envelope.data().data()),
           static_cast<std::streamsize>(a.spectral_envelope.size() * sizeof(double)));
  os.write(reinterpret_cast<const char*>(a.aperiodicity.data().data()),
           static_cast<std::streamsize>(a.aperiodicity.size() * sizeof(double)));
}

void save_analysis(const std::filesystem::path& path, const AnalysisResult& a) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  save_analysis(os, a);
  if (!os) throw IoError("short write to " + path.string());
}

AnalysisResult load_analysis(std::istream& is, const std::string& context) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw CorruptFile(context + ": not an analysis dump");
  if (read_pod<std::uint32_t>(is, context) != kVersion)
    throw VersionMismatch(context + ": unknown analysis dump version");
  const auto frames = read_pod<std::uint64_t>(is, context);
  const auto bins = read_pod<std::uint64_t>(is, context);

  AnalysisResult a;
  a.sample_rate_hz = static_cast<int>(read_pod<std::uint32_t>(is, context));
  a.fft_size = static_cast<int>(read_pod<std::uint32_t>(is, context));
  a.f0.frame_period_ms = read_pod<double>(is, context);
  a.f0.values_hz.resize(frames);
  a.spectral_envelope = Matrix(frames, bins);
  a.aperiodicity = Matrix(frames, bins);
  auto read_block = [&](double* dst, std::size_t count) {
    if (!is.read(reinterpret_cast<char*>(dst),
                 static_cast<std::streamsize>(count * sizeof(double))))
      throw CorruptFile(context + ": truncated analysis dump");
  };
  read_block(a.f0.values_hz.data(), frames);
  read_block(a.spectral_envelope.data().data(), a.spectral_envelope.size());
  read_block(a.aperiodicity.data().data(), a.aperiodicity.size());
  a.validate();
  return a;
}

AnalysisResult load_analysis(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return load_analysis(is, path.string());
}

}  // namespace sanitone
