#include <chrono>
#include <cmath>
#include <string>

#include "sanitone/cyclegan.hpp"
#include "sanitone/detail/rng.hpp"
#include "sanitone/errors.hpp"

namespace sanitone {

using nn::ForwardCache;
using nn::Gradients;
using nn::Layer;
using nn::LayerKind;
using nn::ModelParams;
using nn::Tensor;

namespace {

Layer conv_layer(LayerKind kind, int in_ch, int out_ch, int kernel, int stride,
                 int upsample, std::string name) {
  Layer l;
  l.kind = kind;
  l.name = std::move(name);
  l.stride = stride;
  l.upsample = upsample;
  const std::size_t gate = kind == LayerKind::kConv1dGlu ? 2 : 1;
  const std::size_t rows = gate * static_cast<std::size_t>(out_ch) *
                           static_cast<std::size_t>(upsample);
  l.weight = Tensor({rows, static_cast<std::size_t>(in_ch),
                     static_cast<std::size_t>(kernel)});
  l.bias = Tensor({rows});
  return l;
}

Layer norm_layer(int ch, std::string name, int skip_from = -1) {
  Layer l;
  l.kind = LayerKind::kInstanceNorm;
  l.name = std::move(name);
  l.weight = Tensor({static_cast<std::size_t>(ch)});
  l.bias = Tensor({static_cast<std::size_t>(ch)});
  l.skip_add_from = skip_from;
  return l;
}

ModelParams build_generator(const ArchDescriptor& a) {
  const int w0 = a.gen_widths[0], w1 = a.gen_widths[1], w2 = a.gen_widths[2];
  ModelParams p;
  p.layers.push_back(
      conv_layer(LayerKind::kConv1dGlu, a.feature_dim, w0, a.gen_kernel, 1, 1, "g_in"));
  p.layers.push_back(
      conv_layer(LayerKind::kConv1dGlu, w0, w1, a.gen_kernel, 2, 1, "g_down1"));
  p.layers.push_back(norm_layer(w1, "g_down1_norm"));
  p.layers.push_back(
      conv_layer(LayerKind::kConv1dGlu, w1, w2, a.gen_kernel, 2, 1, "g_down2"));
  p.layers.push_back(norm_layer(w2, "g_down2_norm"));
  for (int r = 0; r < a.residual_blocks; ++r) {
    const int block_input = static_cast<int>(p.layers.size()) - 1;
    const std::string tag = "g_res" + std::to_string(r);
    p.layers.push_back(
        conv_layer(LayerKind::kConv1dGlu, w2, w2, a.res_kernel, 1, 1, tag + "a"));
    p.layers.push_back(norm_layer(w2, tag + "a_norm"));
    p.layers.push_back(
        conv_layer(LayerKind::kConv1d, w2, w2, a.res_kernel, 1, 1, tag + "b"));
    p.layers.push_back(norm_layer(w2, tag + "b_norm", block_input));
  }
  p.layers.push_back(
      conv_layer(LayerKind::kConv1dGlu, w2, w1, a.gen_kernel, 1, 2, "g_up1"));
  p.layers.push_back(norm_layer(w1, "g_up1_norm"));
  p.layers.push_back(
      conv_layer(LayerKind::kConv1dGlu, w1, w0, a.gen_kernel, 1, 2, "g_up2"));
  p.layers.push_back(norm_layer(w0, "g_up2_norm"));
  p.layers.push_back(
      conv_layer(LayerKind::kConv1d, w0, a.feature_dim, a.gen_kernel, 1, 1, "g_out"));
  return p;
}

ModelParams build_discriminator(const ArchDescriptor& a) {
  const int d0 = a.disc_widths[0], d1 = a.disc_widths[1], d2 = a.disc_widths[2];
  ModelParams p;
  p.layers.push_back(
      conv_layer(LayerKind::kConv1dGlu, a.feature_dim, d0, a.disc_kernel, 1, 1, "d_in"));
  p.layers.push_back(
      conv_layer(LayerKind::kConv1dGlu, d0, d1, a.disc_kernel, 2, 1, "d_down1"));
  p.layers.push_back(norm_layer(d1, "d_down1_norm"));
  p.layers.push_back(
      conv_layer(LayerKind::kConv1dGlu, d1, d2, a.disc_kernel, 2, 1, "d_down2"));
  p.layers.push_back(norm_layer(d2, "d_down2_norm"));
  // least-squares patch head, no output nonlinearity
  p.layers.push_back(conv_layer(LayerKind::kConv1d, d2, 1, 3, 1, 1, "d_head"));
  return p;
}

double mean_square_to(const Tensor& t, double target) {
  double acc = 0.0;
  for (double v : t.data) acc += (v - target) * (v - target);
  return acc / static_cast<double>(t.size());
}

Tensor mean_square_grad(const Tensor& t, double target, double scale = 1.0) {
  Tensor g(t.shape);
  const double c = 2.0 * scale / static_cast<double>(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) g.data[i] = c * (t.data[i] - target);
  return g;
}

double l1_mean(const Tensor& a, const Tensor& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += std::fabs(a.data[i] - b.data[i]);
  return acc / static_cast<double>(a.size());
}

Tensor l1_grad(const Tensor& a, const Tensor& b, double scale) {
  Tensor g(a.shape);
  const double c = scale / static_cast<double>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    g.data[i] = d > 0.0 ? c : (d < 0.0 ? -c : 0.0);
  }
  return g;
}

Tensor add_tensors(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
  return out;
}

}  // namespace

void ArchDescriptor::validate() const {
  if (feature_dim <= 0) throw InvalidArch("feature_dim must be positive");
  if (gen_widths.size() != 3 || disc_widths.size() != 3)
    throw InvalidArch("generator and discriminator need three channel widths");
  for (int w : gen_widths)
    if (w <= 0) throw InvalidArch("generator widths must be positive");
  for (int w : disc_widths)
    if (w <= 0) throw InvalidArch("discriminator widths must be positive");
  if (gen_kernel % 2 == 0 || res_kernel % 2 == 0 || disc_kernel % 2 == 0)
    throw InvalidArch("kernel sizes must be odd");
  if (residual_blocks < 0) throw InvalidArch("residual_blocks must be >= 0");
}

int ArchDescriptor::receptive_field_frames() const {
  int rf = 1, jump = 1;
  auto conv = [&](int kernel, int stride) {
    rf += (kernel - 1) * jump;
    jump *= stride;
  };
  conv(gen_kernel, 1);
  conv(gen_kernel, 2);
  conv(gen_kernel, 2);
  for (int r = 0; r < residual_blocks; ++r) {
    conv(res_kernel, 1);
    conv(res_kernel, 1);
  }
  conv(gen_kernel, 1);
  jump /= 2;
  conv(gen_kernel, 1);
  jump /= 2;
  conv(gen_kernel, 1);
  return rf;
}

std::size_t CycleGanModel::parameter_count() const {
  return gen_xy.parameter_count() + gen_yx.parameter_count() +
         disc_x.parameter_count() + disc_y.parameter_count();
}

void TrainConfig::validate(const ArchDescriptor& arch) const {
  if (iterations < 0) throw ValidationError("iterations");
  if (lr_generator <= 0.0) throw ValidationError("lr_generator");
  if (lr_discriminator <= 0.0) throw ValidationError("lr_discriminator");
  if (lambda_cycle < 0.0) throw ValidationError("lambda_cycle");
  if (lambda_identity < 0.0) throw ValidationError("lambda_identity");
  if (identity_cutoff_iter < 0) throw ValidationError("identity_cutoff_iter");
  if (batch_size != 1) throw ValidationError("batch_size");
  if (segment_frames < arch.receptive_field_frames())
    throw ValidationError("segment_frames");
  if (segment_frames % arch.time_divisor() != 0)
    throw ValidationError("segment_frames");
}

CycleGanModel build_model(const ArchDescriptor& arch, std::uint64_t seed) {
  arch.validate();
  CycleGanModel m;
  m.arch = arch;
  m.gen_xy = build_generator(arch);
  m.gen_yx = build_generator(arch);
  m.disc_x = build_discriminator(arch);
  m.disc_y = build_discriminator(arch);
  detail::Rng rng(seed);
  nn::init_params(m.gen_xy, rng);
  nn::init_params(m.gen_yx, rng);
  nn::init_params(m.disc_x, rng);
  nn::init_params(m.disc_y, rng);
  return m;
}

OptimizerState make_optimizer_state(const CycleGanModel& m) {
  OptimizerState s;
  s.gen_xy = nn::make_adam_state(m.gen_xy);
  s.gen_yx = nn::make_adam_state(m.gen_yx);
  s.disc_x = nn::make_adam_state(m.disc_x);
  s.disc_y = nn::make_adam_state(m.disc_y);
  return s;
}

LossBundle compute_losses(const CycleGanModel& m, const Tensor& x,
                          const Tensor& y, const TrainConfig& cfg,
                          int iteration) {
  const Tensor gx = nn::forward(m.gen_xy, x);
  const Tensor fy = nn::forward(m.gen_yx, y);
  const Tensor cycle_x = nn::forward(m.gen_yx, gx);
  const Tensor cycle_y = nn::forward(m.gen_xy, fy);

  const Tensor d_real_x = nn::forward(m.disc_x, x);
  const Tensor d_fake_x = nn::forward(m.disc_x, fy);
  const Tensor d_real_y = nn::forward(m.disc_y, y);
  const Tensor d_fake_y = nn::forward(m.disc_y, gx);

  LossBundle lb;
  lb.adv_d = mean_square_to(d_real_x, 1.0) + mean_square_to(d_fake_x, 0.0) +
             mean_square_to(d_real_y, 1.0) + mean_square_to(d_fake_y, 0.0);
  lb.adv_g = mean_square_to(d_fake_y, 1.0) + mean_square_to(d_fake_x, 1.0);
  lb.cycle = l1_mean(cycle_x, x) + l1_mean(cycle_y, y);
  if (iteration < cfg.identity_cutoff_iter) {
    const Tensor idt_y = nn::forward(m.gen_xy, y);
    const Tensor idt_x = nn::forward(m.gen_yx, x);
    lb.identity = l1_mean(idt_y, y) + l1_mean(idt_x, x);
  }
  lb.total_g = lb.adv_g + cfg.lambda_cycle * lb.cycle +
               cfg.lambda_identity * lb.identity;
  lb.total_d = lb.adv_d;
  return lb;
}

LossBundle train_step(CycleGanModel& m, OptimizerState& opt, const Tensor& x,
                      const Tensor& y, const TrainConfig& cfg, int iteration) {
  LossBundle lb;

  // ---- discriminator phase (generators fixed) ----
  {
    const Tensor gx = nn::forward(m.gen_xy, x);
    const Tensor fy = nn::forward(m.gen_yx, y);

    auto update_disc = [&](ModelParams& disc, nn::AdamState& state,
                           const Tensor& real, const Tensor& fake) {
      ForwardCache cache_real, cache_fake;
      const Tensor out_real = nn::forward(disc, real, &cache_real);
      const Tensor out_fake = nn::forward(disc, fake, &cache_fake);
      const double loss =
          mean_square_to(out_real, 1.0) + mean_square_to(out_fake, 0.0);
      Gradients g = nn::backward(disc, cache_real, mean_square_grad(out_real, 1.0));
      g.accumulate(nn::backward(disc, cache_fake, mean_square_grad(out_fake, 0.0)));
      nn::adam_step(disc, g, state, cfg.lr_discriminator);
      return loss;
    };

    lb.adv_d = update_disc(m.disc_x, opt.disc_x, x, fy) +
               update_disc(m.disc_y, opt.disc_y, y, gx);
    lb.total_d = lb.adv_d;
  }

  // ---- generator phase (freshly updated discriminators) ----
  {
    ForwardCache c_gx, c_fgx, c_fy, c_gfy, c_dy, c_dx;
    const Tensor gx = nn::forward(m.gen_xy, x, &c_gx);
    const Tensor fgx = nn::forward(m.gen_yx, gx, &c_fgx);
    const Tensor fy = nn::forward(m.gen_yx, y, &c_fy);
    const Tensor gfy = nn::forward(m.gen_xy, fy, &c_gfy);
    const Tensor d_fake_y = nn::forward(m.disc_y, gx, &c_dy);
    const Tensor d_fake_x = nn::forward(m.disc_x, fy, &c_dx);

    lb.adv_g = mean_square_to(d_fake_y, 1.0) + mean_square_to(d_fake_x, 1.0);
    lb.cycle = l1_mean(fgx, x) + l1_mean(gfy, y);

    Gradients g_xy, g_yx;
    {
      // x -> G -> D(Y) adversarial path and x -> G -> F cycle path
      const Gradients through_dy =
          nn::backward(m.disc_y, c_dy, mean_square_grad(d_fake_y, 1.0));
      Gradients through_fgx =
          nn::backward(m.gen_yx, c_fgx, l1_grad(fgx, x, cfg.lambda_cycle));
      const Tensor up_gx = add_tensors(through_dy.input, through_fgx.input);
      g_xy = nn::backward(m.gen_xy, c_gx, up_gx);
      g_yx = std::move(through_fgx);
    }
    {
      // y -> F -> D(X) adversarial path and y -> F -> G cycle path
      const Gradients through_dx =
          nn::backward(m.disc_x, c_dx, mean_square_grad(d_fake_x, 1.0));
      Gradients through_gfy =
          nn::backward(m.gen_xy, c_gfy, l1_grad(gfy, y, cfg.lambda_cycle));
      const Tensor up_fy = add_tensors(through_dx.input, through_gfy.input);
      g_yx.accumulate(nn::backward(m.gen_yx, c_fy, up_fy));
      g_xy.accumulate(through_gfy);
    }

    if (iteration < cfg.identity_cutoff_iter && cfg.lambda_identity > 0.0) {
      ForwardCache c_idt_y, c_idt_x;
      const Tensor idt_y = nn::forward(m.gen_xy, y, &c_idt_y);
      const Tensor idt_x = nn::forward(m.gen_yx, x, &c_idt_x);
      lb.identity = l1_mean(idt_y, y) + l1_mean(idt_x, x);
      g_xy.accumulate(
          nn::backward(m.gen_xy, c_idt_y, l1_grad(idt_y, y, cfg.lambda_identity)));
      g_yx.accumulate(
          nn::backward(m.gen_yx, c_idt_x, l1_grad(idt_x, x, cfg.lambda_identity)));
    }

    nn::adam_step(m.gen_xy, g_xy, opt.gen_xy, cfg.lr_generator);
    nn::adam_step(m.gen_yx, g_yx, opt.gen_yx, cfg.lr_generator);

    lb.total_g = lb.adv_g + cfg.lambda_cycle * lb.cycle +
                 cfg.lambda_identity * lb.identity;
  }
  return lb;
}

namespace {

// One (channels x segment) crop; utterances shorter than the segment are
// left-aligned and zero padded.
Tensor crop_segment(const McepSequence& m, int segment_frames,
                    detail::Rng& rng, bool* padded) {
  const std::size_t dims = m.width();
  const std::size_t frames = m.frames();
  const std::size_t segment = static_cast<std::size_t>(segment_frames);
  Tensor t({dims, segment});
  std::size_t start = 0;
  std::size_t count = segment;
  if (frames >= segment) {
    start = rng.index(frames - segment + 1);
  } else {
    count = frames;
    *padded = true;
  }
  for (std::size_t f = 0; f < count; ++f) {
    const auto row = m.coeffs.row(start + f);
    for (std::size_t d = 0; d < dims; ++d) t.at(d, f) = row[d];
  }
  return t;
}

}  // namespace

std::pair<CycleGanModel, TrainHistory> train(
    std::span<const McepSequence> corpus_x,
    std::span<const McepSequence> corpus_y, const ArchDescriptor& arch,
    const TrainConfig& cfg) {
  arch.validate();
  cfg.validate(arch);
  if (corpus_x.empty() || corpus_y.empty())
    throw EmptyCorpus("both feature corpora must be non-empty");
  for (const auto& m : corpus_x)
    if (m.width() != static_cast<std::size_t>(arch.feature_dim))
      throw ShapeMismatch("corpus X width does not match arch.feature_dim");
  for (const auto& m : corpus_y)
    if (m.width() != static_cast<std::size_t>(arch.feature_dim))
      throw ShapeMismatch("corpus Y width does not match arch.feature_dim");

  CycleGanModel model = build_model(arch, cfg.seed);
  OptimizerState opt = make_optimizer_state(model);
  detail::Rng sampler(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

  TrainHistory history;
  history.records.reserve(static_cast<std::size_t>(cfg.iterations));

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    IterationRecord rec;
    const Tensor x = crop_segment(corpus_x[sampler.index(corpus_x.size())],
                                  cfg.segment_frames, sampler, &rec.padded_x);
    const Tensor y = crop_segment(corpus_y[sampler.index(corpus_y.size())],
                                  cfg.segment_frames, sampler, &rec.padded_y);
    const auto t0 = std::chrono::steady_clock::now();
    rec.losses = train_step(model, opt, x, y, cfg, iter);
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    history.records.push_back(rec);
  }
  return {std::move(model), std::move(history)};
}

}  // namespace sanitone
