#include "sanitone/overhead.hpp"

#include <sys/resource.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "sanitone/errors.hpp"
#include "sanitone/features.hpp"
#include "sanitone/pipeline.hpp"
#include "sanitone/resample.hpp"
#include "sanitone/wav_io.hpp"

#include <httplib.h>

namespace sanitone {

namespace {

std::size_t peak_memory_bytes() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return static_cast<std::size_t>(usage.ru_maxrss) * 1024;  // KiB on linux
}

std::int64_t epoch_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

class StageTimer {
 public:
  explicit StageTimer(RunRecord* record) : record_(record) {}

  template <typename Fn>
  auto time(const std::string& stage, Fn&& fn) {
    StageSample sample;
    sample.stage = stage;
    sample.epoch_start_ms = epoch_ms();
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish(sample, t0);
      return;
    } else {
      auto result = fn();
      finish(sample, t0);
      return result;
    }
  }

 private:
  void finish(StageSample& sample,
              std::chrono::steady_clock::time_point t0) {
    sample.millis = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    sample.epoch_end_ms = epoch_ms();
    sample.peak_mem_bytes = peak_memory_bytes();
    record_->stages.push_back(sample);
  }

  RunRecord* record_;
};

void emit_output(const Waveform& w, const std::filesystem::path& input,
                 const BenchSink& sink, int run) {
  std::filesystem::path out;
  if (!sink.out_dir.empty()) {
    std::filesystem::create_directories(sink.out_dir);
    out = sink.out_dir / (input.stem().string() + "-run" +
                          std::to_string(run) + ".wav");
  } else {
    out = std::filesystem::temp_directory_path() /
          ("sanitone-bench-" + std::to_string(run) + ".wav");
  }
  write_wav(out, w);

  if (!sink.upload_url.empty()) {
    // URL form: http://host:port/path
    const std::string& url = sink.upload_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
      throw ValidationError("upload_url");
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string host =
        url.substr(scheme_end + 3,
                   (path_start == std::string::npos ? url.size() : path_start) -
                       scheme_end - 3);
    const std::string target =
        path_start == std::string::npos ? "/" : url.substr(path_start);

    std::ifstream is(out, std::ios::binary);
    std::ostringstream body;
    body << is.rdbuf();
    httplib::Client client(("http://" + host).c_str());
    client.set_connection_timeout(5);
    auto res = client.Post(target.c_str(), body.str(), "audio/wav");
    if (!res) throw IoError("upload to " + url + " failed");
  }
}

}  // namespace

std::vector<StageAggregate> OverheadReport::aggregates() const {
  std::vector<StageAggregate> out;
  if (runs.empty()) return out;
  for (std::size_t s = 0; s < runs.front().stages.size(); ++s) {
    std::vector<double> values;
    values.reserve(runs.size());
    for (const auto& r : runs) values.push_back(r.stages[s].millis);
    std::sort(values.begin(), values.end());
    StageAggregate agg;
    agg.stage = runs.front().stages[s].stage;
    agg.median_ms = values[values.size() / 2];
    agg.min_ms = values.front();
    agg.max_ms = values.back();
    out.push_back(agg);
  }
  return out;
}

double OverheadReport::median_total_ms() const {
  std::vector<double> totals;
  totals.reserve(runs.size());
  for (const auto& r : runs) totals.push_back(r.total_millis);
  std::sort(totals.begin(), totals.end());
  return totals.empty() ? 0.0 : totals[totals.size() / 2];
}

OverheadReport measure_overhead(const std::filesystem::path& input_wav,
                                const FrozenFilter* filter, BenchMode mode,
                                int runs, const BenchSink& sink) {
  if (runs < 1) throw ValidationError("runs");
  if (mode == BenchMode::kFiltered && filter == nullptr)
    throw ValidationError("filter");

  OverheadReport report;
  report.mode = mode;

  for (int run = 0; run < runs; ++run) {
    RunRecord record;
    StageTimer timer(&record);
    const auto run_start = std::chrono::steady_clock::now();

    Waveform audio = timer.time("load", [&] {
      Waveform w = read_wav(input_wav);
      return w.sample_rate_hz == 16000 ? w : resample(w, 16000);
    });

    Waveform to_emit;
    if (mode == BenchMode::kFiltered) {
      const AnalysisResult analysis =
          timer.time("preprocess", [&] { return analyze(audio, filter->vocoder); });

      AnalysisResult converted = analysis;
      timer.time("convert", [&] {
        const McepSequence coded =
            sp_to_mcep(analysis.spectral_envelope, filter->features);
        converted.spectral_envelope =
            mcep_to_sp(filter->convert(coded), filter->vocoder.fft_size);
        converted.f0 = convert_log_f0(analysis.f0, filter->f0_src, filter->f0_tgt);
      });

      to_emit = timer.time("generate", [&] { return synthesize(converted); });
    } else {
      to_emit = audio;
    }

    timer.time("emit", [&] { emit_output(to_emit, input_wav, sink, run); });

    record.total_millis = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - run_start)
                              .count();
    report.runs.push_back(std::move(record));
  }
  return report;
}

void write_overhead_csv(const std::filesystem::path& path,
                        const OverheadReport& r) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "run,stage,millis,peak_mem_bytes\n";
  for (std::size_t run = 0; run < r.runs.size(); ++run) {
    for (const auto& s : r.runs[run].stages)
      os << run << ',' << s.stage << ',' << s.millis << ',' << s.peak_mem_bytes
         << '\n';
    os << run << ",total," << r.runs[run].total_millis << ','
       << r.runs[run].stages.back().peak_mem_bytes << '\n';
  }
  if (!os) throw IoError("short write to " + path.string());
}

std::vector<MeterSample> load_meter_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "epoch_millis,watts")
    throw ParseError(path.string() + ":1: expected header epoch_millis,watts");

  std::vector<MeterSample> samples;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected epoch_millis,watts");
    try {
      MeterSample s;
      s.epoch_millis = std::stoll(line.substr(0, comma));
      s.watts = std::stod(line.substr(comma + 1));
      samples.push_back(s);
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": bad numeric field");
    }
  }
  std::sort(samples.begin(), samples.end(),
            [](const MeterSample& a, const MeterSample& b) {
              return a.epoch_millis < b.epoch_millis;
            });
  return samples;
}

namespace {

double interp_watts(std::span<const MeterSample> meter, double t_ms) {
  if (meter.empty()) return 0.0;
  if (t_ms <= static_cast<double>(meter.front().epoch_millis))
    return meter.front().watts;
  if (t_ms >= static_cast<double>(meter.back().epoch_millis))
    return meter.back().watts;
  for (std::size_t i = 1; i < meter.size(); ++i) {
    const double t0 = static_cast<double>(meter[i - 1].epoch_millis);
    const double t1 = static_cast<double>(meter[i].epoch_millis);
    if (t_ms <= t1) {
      const double u = t1 > t0 ? (t_ms - t0) / (t1 - t0) : 0.0;
      return meter[i - 1].watts + u * (meter[i].watts - meter[i - 1].watts);
    }
  }
  return meter.back().watts;
}

}  // namespace

std::vector<EnergyRow> integrate_energy(const OverheadReport& r,
                                        std::span<const MeterSample> meter) {
  std::vector<EnergyRow> rows;
  for (std::size_t run = 0; run < r.runs.size(); ++run) {
    for (const auto& s : r.runs[run].stages) {
      const double a = static_cast<double>(s.epoch_start_ms);
      const double b = static_cast<double>(s.epoch_end_ms);
      std::vector<double> knots = {a};
      for (const auto& m : meter) {
        const double t = static_cast<double>(m.epoch_millis);
        if (t > a && t < b) knots.push_back(t);
      }
      knots.push_back(b);
      double joules = 0.0;
      for (std::size_t i = 1; i < knots.size(); ++i) {
        const double w0 = interp_watts(meter, knots[i - 1]);
        const double w1 = interp_watts(meter, knots[i]);
        joules += 0.5 * (w0 + w1) * (knots[i] - knots[i - 1]) / 1000.0;
      }
      rows.push_back({run, s.stage, joules});
    }
  }
  return rows;
}

void write_energy_csv(const std::filesystem::path& path,
                      std::span<const EnergyRow> rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "run,stage,joules\n";
  for (const auto& row : rows)
    os << row.run << ',' << row.stage << ',' << row.joules << '\n';
  if (!os) throw IoError("short write to " + path.string());
}

}  // namespace sanitone
