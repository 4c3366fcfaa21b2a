#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sanitone/cyclegan.hpp"

namespace sanitone {

enum class BenchMode { kBaseline, kFiltered };

struct StageSample {
  std::string stage;
  double millis = 0.0;
  std::size_t peak_mem_bytes = 0;
  // wall-clock window for energy integration against an external meter
  std::int64_t epoch_start_ms = 0;
  std::int64_t epoch_end_ms = 0;
};

struct RunRecord {
  std::vector<StageSample> stages;
  double total_millis = 0.0;
};

struct StageAggregate {
  std::string stage;
  double median_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
};

struct OverheadReport {
  BenchMode mode = BenchMode::kBaseline;
  std::vector<RunRecord> runs;

  std::vector<StageAggregate> aggregates() const;
  double median_total_ms() const;
};

// Where the processed audio goes in the emit stage: a directory write and,
// when a URL is supplied, an HTTP POST of the file body.
struct BenchSink {
  std::filesystem::path out_dir;
  std::string upload_url;
};

// Baseline mode times load and emit only; filtered mode adds the
// pre-process / convert / generate stages. Monotonic clock, peak resident
// memory sampled after each stage.
OverheadReport measure_overhead(const std::filesystem::path& input_wav,
                                const FrozenFilter* filter, BenchMode mode,
                                int runs, const BenchSink& sink);

// run,stage,millis,peak_mem_bytes
void write_overhead_csv(const std::filesystem::path& path,
                        const OverheadReport& r);

// External power-meter samples: epoch_millis,watts
struct MeterSample {
  std::int64_t epoch_millis = 0;
  double watts = 0.0;
};

std::vector<MeterSample> load_meter_csv(const std::filesystem::path& path);

struct EnergyRow {
  std::size_t run = 0;
  std::string stage;
  double joules = 0.0;
};

// Trapezoidal integration of meter power over each stage window.
std::vector<EnergyRow> integrate_energy(const OverheadReport& r,
                                        std::span<const MeterSample> meter);

// run,stage,joules
void write_energy_csv(const std::filesystem::path& path,
                      std::span<const EnergyRow> rows);

}  // namespace sanitone
