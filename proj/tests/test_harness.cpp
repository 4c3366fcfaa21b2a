#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "sanitone/config.hpp"
#include "sanitone/errors.hpp"
#include "sanitone/overhead.hpp"
#include "sanitone/pipeline.hpp"
#include "sanitone/wav_io.hpp"
#include "support/synthetic_voice.hpp"
#include "support/test_support.hpp"

using namespace sanitone;
using namespace test_support;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::trunc);
  os << text;
}

FrozenFilter small_identity_filter() {
  FrozenFilter f;
  f.arch = ArchDescriptor{};
  nn::Layer l;
  l.kind = nn::LayerKind::kConv1d;
  l.name = "identity";
  l.weight = nn::Tensor({25, 25, 1});
  for (std::size_t c = 0; c < 25; ++c) l.weight.at(c, c, 0) = 1.0;
  l.bias = nn::Tensor({25});
  f.generator.layers.push_back(l);
  f.f0_src = F0Stats{std::log(150.0), 0.3, 100};
  f.f0_tgt = f.f0_src;
  f.feature_stats.mean.assign(25, 0.0);
  f.feature_stats.stddev.assign(25, 1.0);
  return f;
}

}  // namespace

TEST_CASE("empty config file yields the documented defaults") {
  TempDir dir("config_default");
  const auto path = dir.file("empty.cfg");
  write_text(path, "");
  const Config cfg = load_config(path);
  CHECK(cfg.train.iterations == 7500);
  CHECK(cfg.train.lr_generator == 2e-4);
  CHECK(cfg.train.lr_discriminator == 1e-4);
  CHECK(cfg.train.lambda_cycle == 10.0);
  CHECK(cfg.train.lambda_identity == 5.0);
  CHECK(cfg.train.identity_cutoff_iter == 2500);
  CHECK(cfg.train.segment_frames == 128);
  CHECK(cfg.vocoder.frame_period_ms == 5.0);
  CHECK(cfg.vocoder.fft_size == 1024);
  CHECK(cfg.features.order == 24);
  CHECK(cfg.features.alpha == 0.42);
  CHECK(cfg.arch.feature_dim == 25);
}

TEST_CASE("config values parse through sections and comments") {
  TempDir dir("config_parse");
  const auto path = dir.file("full.cfg");
  write_text(path,
             "# toolkit configuration\n"
             "[train]\n"
             "iterations = 2000\n"
             "seed = 42   # reproducibility\n"
             "[vocoder]\n"
             "f0_floor_hz = 60\n"
             "[features]\n"
             "order = 30\n"
             "[arch]\n"
             "gen_widths = 16, 24, 32\n"
             "[paths]\n"
             "filter_path = out/filter.eflt\n");
  const Config cfg = load_config(path);
  CHECK(cfg.train.iterations == 2000);
  CHECK(cfg.train.seed == 42);
  CHECK(cfg.vocoder.f0_floor_hz == 60.0);
  CHECK(cfg.features.order == 30);
  CHECK(cfg.arch.feature_dim == 31);  // tracks the order
  CHECK(cfg.arch.gen_widths == std::vector<int>{16, 24, 32});
  CHECK(cfg.paths.filter_path == std::filesystem::path("out/filter.eflt"));
}

TEST_CASE("config errors carry line numbers and key names") {
  TempDir dir("config_err");
  SUBCASE("negative learning rate names the key") {
    const auto path = dir.file("bad_lr.cfg");
    write_text(path, "[train]\nlr_generator = -1\n");
    try {
      load_config(path);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("lr_generator") != std::string::npos);
    }
  }
  SUBCASE("unknown keys are rejected by name") {
    const auto path = dir.file("unknown.cfg");
    write_text(path, "[train]\nlearning_rate = 0.1\n");
    try {
      load_config(path);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("train.learning_rate") != std::string::npos);
    }
  }
  SUBCASE("syntax errors carry the line number") {
    const auto path = dir.file("syntax.cfg");
    write_text(path, "[train]\niterations = 100\nthis line has no equals\n");
    try {
      load_config(path);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
  }
  SUBCASE("non-numeric values are parse errors") {
    const auto path = dir.file("nan.cfg");
    write_text(path, "[train]\niterations = soon\n");
    CHECK_THROWS_AS(load_config(path), ParseError);
  }
}

TEST_CASE("overhead staging: baseline lacks the filter stages") {
  TempDir dir("bench_base");
  const auto wav = dir.file("in.wav");
  write_wav(wav, make_vowel(140.0, {{800.0, 130.0}}, 0.4, 16000));

  BenchSink sink;
  sink.out_dir = dir.file("out");
  const OverheadReport base =
      measure_overhead(wav, nullptr, BenchMode::kBaseline, 2, sink);
  REQUIRE(base.runs.size() == 2);
  for (const auto& run : base.runs) {
    REQUIRE(run.stages.size() == 2);
    CHECK(run.stages[0].stage == "load");
    CHECK(run.stages[1].stage == "emit");
    for (const auto& s : run.stages) {
      CHECK(s.millis >= 0.0);
      CHECK(s.peak_mem_bytes > 0);
    }
    double sum = 0.0;
    for (const auto& s : run.stages) sum += s.millis;
    CHECK(sum <= run.total_millis + 1.0);  // timer resolution slack
  }
}

TEST_CASE("overhead staging: filtered mode adds stages and dominates baseline") {
  TempDir dir("bench_filt");
  const auto wav = dir.file("in.wav");
  write_wav(wav, make_vowel(140.0, {{800.0, 130.0}}, 0.4, 16000));
  const FrozenFilter filter = small_identity_filter();

  BenchSink sink;
  sink.out_dir = dir.file("out");
  const OverheadReport filtered =
      measure_overhead(wav, &filter, BenchMode::kFiltered, 5, sink);
  REQUIRE(filtered.runs.size() == 5);
  for (const auto& run : filtered.runs) {
    REQUIRE(run.stages.size() == 5);
    CHECK(run.stages[0].stage == "load");
    CHECK(run.stages[1].stage == "preprocess");
    CHECK(run.stages[2].stage == "convert");
    CHECK(run.stages[3].stage == "generate");
    CHECK(run.stages[4].stage == "emit");
    CHECK(run.stages[1].millis + run.stages[2].millis + run.stages[3].millis >
          0.0);
  }

  const OverheadReport base =
      measure_overhead(wav, nullptr, BenchMode::kBaseline, 5, sink);
  CHECK(filtered.median_total_ms() > base.median_total_ms());

  const auto aggs = filtered.aggregates();
  REQUIRE(aggs.size() == 5);
  for (const auto& a : aggs) {
    CHECK(a.median_ms >= a.min_ms);
    CHECK(a.median_ms <= a.max_ms);
  }

  const auto csv = dir.file("overhead.csv");
  write_overhead_csv(csv, filtered);
  std::ifstream is(csv);
  std::string line;
  std::getline(is, line);
  CHECK(line == "run,stage,millis,peak_mem_bytes");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 5 * 6);  // five stages plus a total row per run
}

TEST_CASE("meter merge integrates power over stage windows") {
  TempDir dir("bench_meter");
  const auto wav = dir.file("in.wav");
  write_wav(wav, make_vowel(140.0, {{800.0, 130.0}}, 0.3, 16000));
  const FrozenFilter filter = small_identity_filter();

  BenchSink sink;
  sink.out_dir = dir.file("out");
  const OverheadReport report =
      measure_overhead(wav, &filter, BenchMode::kFiltered, 1, sink);

  // synthetic meter: constant 2 W across the whole measured window
  const auto t0 = report.runs.front().stages.front().epoch_start_ms - 1000;
  const auto t1 = report.runs.front().stages.back().epoch_end_ms + 1000;
  std::vector<MeterSample> meter = {{t0, 2.0}, {t1, 2.0}};

  const auto rows = integrate_energy(report, meter);
  REQUIRE(rows.size() == report.runs.front().stages.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& stage = report.runs.front().stages[i];
    const double window_s =
        static_cast<double>(stage.epoch_end_ms - stage.epoch_start_ms) / 1000.0;
    CHECK(rows[i].joules == doctest::Approx(2.0 * window_s).epsilon(1e-9));
  }

  const auto meter_csv = dir.file("meter.csv");
  std::ofstream ms(meter_csv);
  ms << "epoch_millis,watts\n" << t0 << ",2.0\n" << t1 << ",2.0\n";
  ms.close();
  const auto loaded = load_meter_csv(meter_csv);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].watts == 2.0);

  const auto energy_csv = dir.file("energy.csv");
  write_energy_csv(energy_csv, rows);
  std::ifstream is(energy_csv);
  std::string line;
  std::getline(is, line);
  CHECK(line == "run,stage,joules");
}

TEST_CASE("meter csv parse failures carry positions") {
  TempDir dir("meter_bad");
  const auto p = dir.file("bad.csv");
  std::ofstream(p) << "epoch_millis,watts\nnot_a_number,2.0\n";
  CHECK_THROWS_AS(load_meter_csv(p), ParseError);
  const auto q = dir.file("hdr.csv");
  std::ofstream(q) << "time,power\n1,2\n";
  CHECK_THROWS_AS(load_meter_csv(q), ParseError);
}
