#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "sanitone/features.hpp"
#include "sanitone/nn.hpp"
#include "sanitone/vocoder.hpp"

namespace sanitone {

// Channel widths and kernel sizes of the gated 1-D convolutional pair of
// generators and discriminators. The generator downsamples time twice,
// runs residual blocks at the bottleneck, and upsamples back.
struct ArchDescriptor {
  int feature_dim = 25;  // mcep order + 1
  std::vector<int> gen_widths = {24, 32, 48};
  int gen_kernel = 5;
  int res_kernel = 3;
  int residual_blocks = 3;
  std::vector<int> disc_widths = {24, 32, 48};
  int disc_kernel = 5;

  void validate() const;  // throws InvalidArch
  // time axis must be a multiple of this for the generator to preserve length
  int time_divisor() const { return 4; }
  int receptive_field_frames() const;
};

struct CycleGanModel {
  nn::ModelParams gen_xy;  // emotional -> neutral, the deployed direction
  nn::ModelParams gen_yx;
  nn::ModelParams disc_x;
  nn::ModelParams disc_y;
  ArchDescriptor arch;

  std::size_t parameter_count() const;
};

struct TrainConfig {
  int iterations = 7500;
  double lr_generator = 2e-4;
  double lr_discriminator = 1e-4;
  double lambda_cycle = 10.0;
  double lambda_identity = 5.0;
  int identity_cutoff_iter = 2500;
  int segment_frames = 128;
  int batch_size = 1;
  std::uint64_t seed = 1;

  void validate(const ArchDescriptor& arch) const;
};

struct LossBundle {
  double adv_g = 0.0;
  double adv_d = 0.0;
  double cycle = 0.0;
  double identity = 0.0;
  double total_g = 0.0;
  double total_d = 0.0;
};

struct IterationRecord {
  LossBundle losses;
  double wall_ms = 0.0;
  bool padded_x = false;  // an utterance shorter than segment_frames was padded
  bool padded_y = false;
};

struct TrainHistory {
  std::vector<IterationRecord> records;
  std::size_t size() const { return records.size(); }
};

struct OptimizerState {
  nn::AdamState gen_xy, gen_yx, disc_x, disc_y;
};

CycleGanModel build_model(const ArchDescriptor& arch, std::uint64_t seed);
OptimizerState make_optimizer_state(const CycleGanModel& m);

// Least-squares adversarial terms (real target 1, fake target 0), L1 cycle
// and identity terms; the identity term is active while
// iteration < cfg.identity_cutoff_iter.
LossBundle compute_losses(const CycleGanModel& m, const nn::Tensor& x,
                          const nn::Tensor& y, const TrainConfig& cfg,
                          int iteration);

// One optimization step: discriminators first (lr_discriminator), then
// generators (lr_generator), in that fixed order.
LossBundle train_step(CycleGanModel& m, OptimizerState& opt,
                      const nn::Tensor& x, const nn::Tensor& y,
                      const TrainConfig& cfg, int iteration);

// Full training run over pre-normalized feature corpora, sampling one random
// segment per domain and iteration from a stream seeded by cfg.seed.
std::pair<CycleGanModel, TrainHistory> train(
    std::span<const McepSequence> corpus_x,
    std::span<const McepSequence> corpus_y, const ArchDescriptor& arch,
    const TrainConfig& cfg);

// Self-contained inference bundle: the deployed generator plus every
// statistic sanitize() needs.
struct FrozenFilter {
  std::uint32_t format_version = 1;
  ArchDescriptor arch;
  nn::ModelParams generator;
  F0Stats f0_src;
  F0Stats f0_tgt;
  FeatureStats feature_stats;
  VocoderConfig vocoder;
  FeatureConfig features;
  bool single_precision = false;

  // raw generator forward on a (channels x time) tensor
  nn::Tensor run_generator(const nn::Tensor& t) const;
  // normalize -> generator -> denormalize, padding time to the divisor
  McepSequence convert(const McepSequence& m) const;
};

FrozenFilter freeze(const CycleGanModel& m, const F0Stats& f0_src,
                    const F0Stats& f0_tgt, const FeatureStats& stats,
                    const VocoderConfig& vocoder_cfg,
                    const FeatureConfig& feature_cfg);

// Rounds the generator weights to 32-bit floats; the file stores f32 blobs.
FrozenFilter to_single_precision(const FrozenFilter& f);

void save_filter(const std::filesystem::path& path, const FrozenFilter& f);
FrozenFilter load_filter(const std::filesystem::path& path);

// Full-model checkpoint (all four networks plus stats), used to defer
// freezing to a separate step.
struct Checkpoint {
  CycleGanModel model;
  F0Stats f0_src;
  F0Stats f0_tgt;
  FeatureStats feature_stats;
  VocoderConfig vocoder;
  FeatureConfig features;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace sanitone
