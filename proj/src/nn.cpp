#include "sanitone/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sanitone/errors.hpp"

namespace sanitone::nn {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::size_t conv_out_time(std::size_t t_in, int stride) {
  return (t_in - 1) / static_cast<std::size_t>(stride) + 1;
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeMismatch(msg);
}

// z[co][t] = bias[co] + sum_{ci,j} w[co][ci][j] * x[ci][t*stride - pad + j]
Tensor conv_raw(const Layer& layer, const Tensor& x) {
  const std::size_t out_total = layer.weight.dim(0);
  const std::size_t in_ch = layer.weight.dim(1);
  const std::size_t kernel = layer.weight.dim(2);
  const int stride = layer.stride;
  const int pad = static_cast<int>(kernel - 1) / 2;
  const std::size_t t_in = x.dim(1);
  const std::size_t t_out = conv_out_time(t_in, stride);

  Tensor z({out_total, t_out});
  for (std::size_t co = 0; co < out_total; ++co) {
    double* zr = z.data.data() + co * t_out;
    const double b = layer.bias.data[co];
    for (std::size_t t = 0; t < t_out; ++t) zr[t] = b;
    for (std::size_t ci = 0; ci < in_ch; ++ci) {
      const double* xr = x.data.data() + ci * t_in;
      for (std::size_t j = 0; j < kernel; ++j) {
        const double wv = layer.weight.at(co, ci, j);
        if (wv == 0.0) continue;
        const long off = static_cast<long>(j) - pad;
        long t_lo = 0;
        while (t_lo < static_cast<long>(t_out) && t_lo * stride + off < 0) ++t_lo;
        long t_hi = static_cast<long>(t_out) - 1;
        while (t_hi >= t_lo &&
               t_hi * stride + off >= static_cast<long>(t_in))
          --t_hi;
        const double* xs = xr + off;
        for (long t = t_lo; t <= t_hi; ++t) zr[t] += wv * xs[t * stride];
      }
    }
  }
  return z;
}

// gradient of conv_raw wrt weights, bias and input
void conv_raw_backward(const Layer& layer, const Tensor& x, const Tensor& gz,
                       Tensor& gw, Tensor& gb, Tensor& gx) {
  const std::size_t out_total = layer.weight.dim(0);
  const std::size_t in_ch = layer.weight.dim(1);
  const std::size_t kernel = layer.weight.dim(2);
  const int stride = layer.stride;
  const int pad = static_cast<int>(kernel - 1) / 2;
  const std::size_t t_in = x.dim(1);
  const std::size_t t_out = gz.dim(1);

  for (std::size_t co = 0; co < out_total; ++co) {
    const double* gzr = gz.data.data() + co * t_out;
    double acc_b = 0.0;
    for (std::size_t t = 0; t < t_out; ++t) acc_b += gzr[t];
    gb.data[co] += acc_b;
    for (std::size_t ci = 0; ci < in_ch; ++ci) {
      const double* xr = x.data.data() + ci * t_in;
      double* gxr = gx.data.data() + ci * t_in;
      for (std::size_t j = 0; j < kernel; ++j) {
        const long off = static_cast<long>(j) - pad;
        long t_lo = 0;
        while (t_lo < static_cast<long>(t_out) && t_lo * stride + off < 0) ++t_lo;
        long t_hi = static_cast<long>(t_out) - 1;
        while (t_hi >= t_lo &&
               t_hi * stride + off >= static_cast<long>(t_in))
          --t_hi;
        const double wv = layer.weight.at(co, ci, j);
        double acc_w = 0.0;
        const double* xs = xr + off;
        double* gxs = gxr + off;
        for (long t = t_lo; t <= t_hi; ++t) {
          acc_w += gzr[t] * xs[t * stride];
          gxs[t * stride] += wv * gzr[t];
        }
        gw.at(co, ci, j) += acc_w;
      }
    }
  }
}

// [blocks*u, T] -> [blocks, T*u]; out[c][t*u + r] = in[c*u + r][t]
Tensor pixel_shuffle(const Tensor& z, int upsample) {
  if (upsample == 1) return z;
  const std::size_t u = static_cast<std::size_t>(upsample);
  const std::size_t blocks = z.dim(0) / u;
  const std::size_t t = z.dim(1);
  Tensor out({blocks, t * u});
  for (std::size_t c = 0; c < blocks; ++c)
    for (std::size_t r = 0; r < u; ++r)
      for (std::size_t i = 0; i < t; ++i)
        out.at(c, i * u + r) = z.at(c * u + r, i);
  return out;
}

Tensor pixel_shuffle_backward(const Tensor& gy, int upsample,
                              std::size_t ch_in, std::size_t t_in) {
  if (upsample == 1) return gy;
  const std::size_t u = static_cast<std::size_t>(upsample);
  Tensor gz({ch_in, t_in});
  const std::size_t blocks = ch_in / u;
  for (std::size_t c = 0; c < blocks; ++c)
    for (std::size_t r = 0; r < u; ++r)
      for (std::size_t i = 0; i < t_in; ++i)
        gz.at(c * u + r, i) = gy.at(c, i * u + r);
  return gz;
}

constexpr double kNormEpsilon = 1e-5;

}  // namespace

bool Tensor::finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv1d: return "conv1d";
    case LayerKind::kConv1dGlu: return "conv1d_glu";
    case LayerKind::kInstanceNorm: return "instance_norm";
    case LayerKind::kLinear: return "linear";
  }
  return "unknown";
}

LayerKind layer_kind_from_name(const std::string& name) {
  if (name == "conv1d") return LayerKind::kConv1d;
  if (name == "conv1d_glu") return LayerKind::kConv1dGlu;
  if (name == "instance_norm") return LayerKind::kInstanceNorm;
  if (name == "linear") return LayerKind::kLinear;
  throw CorruptFile("unknown layer kind: " + name);
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

Tensor forward(const ModelParams& p, const Tensor& x, ForwardCache* cache) {
  if (cache) {
    cache->layers.clear();
    cache->layers.resize(p.layers.size());
    cache->input = x;
  }

  Tensor current = x;
  std::vector<Tensor> outputs;  // kept for skip connections
  outputs.reserve(p.layers.size());

  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    const Layer& layer = p.layers[li];
    LayerCache local;
    local.input = current;

    Tensor y;
    switch (layer.kind) {
      case LayerKind::kConv1d: {
        require(current.shape.size() == 2, "conv1d expects a rank-2 input");
        require(current.dim(0) == layer.weight.dim(1),
                "conv1d input channels mismatch in layer " + layer.name);
        Tensor z = conv_raw(layer, current);
        local.pre_shuffle = z;
        y = pixel_shuffle(z, layer.upsample);
        break;
      }
      case LayerKind::kConv1dGlu: {
        require(current.shape.size() == 2, "conv1d_glu expects a rank-2 input");
        require(current.dim(0) == layer.weight.dim(1),
                "conv1d_glu input channels mismatch in layer " + layer.name);
        Tensor z = conv_raw(layer, current);
        local.pre_shuffle = z;
        const std::size_t half = z.dim(0) / 2;
        Tensor lin({half, z.dim(1)}), gate({half, z.dim(1)});
        std::copy_n(z.data.begin(), half * z.dim(1), lin.data.begin());
        std::copy_n(z.data.begin() + static_cast<long>(half * z.dim(1)),
                    half * z.dim(1), gate.data.begin());
        Tensor a = pixel_shuffle(lin, layer.upsample);
        Tensor g = pixel_shuffle(gate, layer.upsample);
        for (double& v : g.data) v = sigmoid(v);
        y = Tensor(a.shape);
        for (std::size_t i = 0; i < y.size(); ++i)
          y.data[i] = a.data[i] * g.data[i];
        local.glu_linear = a;
        local.gate_sigmoid = g;
        break;
      }
      case LayerKind::kInstanceNorm: {
        require(current.shape.size() == 2, "instance_norm expects a rank-2 input");
        const std::size_t ch = current.dim(0);
        require(layer.weight.size() == ch,
                "instance_norm gain size mismatch in layer " + layer.name);
        const std::size_t t = current.dim(1);
        y = Tensor(current.shape);
        local.normalized = Tensor(current.shape);
        local.inv_std.resize(ch);
        for (std::size_t c = 0; c < ch; ++c) {
          const double* xr = current.data.data() + c * t;
          double mean = 0.0;
          for (std::size_t i = 0; i < t; ++i) mean += xr[i];
          mean /= static_cast<double>(t);
          double var = 0.0;
          for (std::size_t i = 0; i < t; ++i) var += (xr[i] - mean) * (xr[i] - mean);
          var /= static_cast<double>(t);
          const double inv = 1.0 / std::sqrt(var + kNormEpsilon);
          local.inv_std[c] = inv;
          for (std::size_t i = 0; i < t; ++i) {
            const double xh = (xr[i] - mean) * inv;
            local.normalized.at(c, i) = xh;
            y.at(c, i) = layer.weight.data[c] * xh + layer.bias.data[c];
          }
        }
        break;
      }
      case LayerKind::kLinear: {
        require(current.shape.size() == 1, "linear expects a rank-1 input");
        require(current.size() == layer.weight.dim(1),
                "linear input size mismatch in layer " + layer.name);
        const std::size_t out = layer.weight.dim(0);
        y = Tensor({out});
        for (std::size_t o = 0; o < out; ++o) {
          double acc = layer.bias.data[o];
          for (std::size_t i = 0; i < current.size(); ++i)
            acc += layer.weight.at(o, i) * current.data[i];
          y.data[o] = acc;
        }
        break;
      }
    }

    if (layer.skip_add_from >= 0) {
      const Tensor& skip = outputs[static_cast<std::size_t>(layer.skip_add_from)];
      require(skip.same_shape(y),
              "skip connection shape mismatch into layer " + layer.name);
      for (std::size_t i = 0; i < y.size(); ++i) y.data[i] += skip.data[i];
    }

    if (cache) {
      local.output = y;
      cache->layers[li] = std::move(local);
    }
    outputs.push_back(y);
    current = std::move(y);
  }
  return current;
}

void Gradients::accumulate(const Gradients& other, double scale) {
  for (std::size_t l = 0; l < weight.size(); ++l) {
    for (std::size_t i = 0; i < weight[l].size(); ++i)
      weight[l].data[i] += scale * other.weight[l].data[i];
    for (std::size_t i = 0; i < bias[l].size(); ++i)
      bias[l].data[i] += scale * other.bias[l].data[i];
  }
}

void Gradients::scale_all(double s) {
  for (auto& t : weight)
    for (double& v : t.data) v *= s;
  for (auto& t : bias)
    for (double& v : t.data) v *= s;
}

Gradients backward(const ModelParams& p, const ForwardCache& cache,
                   const Tensor& upstream) {
  require(cache.layers.size() == p.layers.size(),
          "cache does not match the model");

  Gradients g;
  g.weight.reserve(p.layers.size());
  g.bias.reserve(p.layers.size());
  for (const auto& l : p.layers) {
    g.weight.emplace_back(l.weight.shape);
    g.bias.emplace_back(l.bias.shape);
  }

  // per-layer output gradients, fed by the next layer and by skip links
  std::vector<Tensor> out_grad(p.layers.size());
  for (std::size_t li = 0; li < p.layers.size(); ++li)
    out_grad[li] = Tensor(cache.layers[li].output.shape);
  require(upstream.same_shape(cache.layers.back().output),
          "upstream gradient shape mismatch");
  out_grad.back() = upstream;

  Tensor input_grad(cache.input.shape);

  for (std::size_t li = p.layers.size(); li-- > 0;) {
    const Layer& layer = p.layers[li];
    const LayerCache& local = cache.layers[li];
    const Tensor& gy = out_grad[li];

    if (layer.skip_add_from >= 0) {
      Tensor& skip_grad = out_grad[static_cast<std::size_t>(layer.skip_add_from)];
      for (std::size_t i = 0; i < gy.size(); ++i) skip_grad.data[i] += gy.data[i];
    }

    Tensor gx(local.input.shape);
    switch (layer.kind) {
      case LayerKind::kConv1d: {
        Tensor gz = pixel_shuffle_backward(gy, layer.upsample,
                                           local.pre_shuffle.dim(0),
                                           local.pre_shuffle.dim(1));
        conv_raw_backward(layer, local.input, gz, g.weight[li], g.bias[li], gx);
        break;
      }
      case LayerKind::kConv1dGlu: {
        const Tensor& a = local.glu_linear;
        const Tensor& s = local.gate_sigmoid;
        Tensor ga(a.shape), gg(a.shape);
        for (std::size_t i = 0; i < a.size(); ++i) {
          ga.data[i] = gy.data[i] * s.data[i];
          gg.data[i] = gy.data[i] * a.data[i] * s.data[i] * (1.0 - s.data[i]);
        }
        const std::size_t half = local.pre_shuffle.dim(0) / 2;
        const std::size_t t_pre = local.pre_shuffle.dim(1);
        Tensor glin = pixel_shuffle_backward(ga, layer.upsample, half, t_pre);
        Tensor ggate = pixel_shuffle_backward(gg, layer.upsample, half, t_pre);
        Tensor gz({2 * half, t_pre});
        std::copy_n(glin.data.begin(), half * t_pre, gz.data.begin());
        std::copy_n(ggate.data.begin(), half * t_pre,
                    gz.data.begin() + static_cast<long>(half * t_pre));
        conv_raw_backward(layer, local.input, gz, g.weight[li], g.bias[li], gx);
        break;
      }
      case LayerKind::kInstanceNorm: {
        const std::size_t ch = local.input.dim(0);
        const std::size_t t = local.input.dim(1);
        for (std::size_t c = 0; c < ch; ++c) {
          const double gamma = layer.weight.data[c];
          const double inv = local.inv_std[c];
          double sum_gy = 0.0, sum_gy_xh = 0.0;
          for (std::size_t i = 0; i < t; ++i) {
            const double gyv = gy.at(c, i);
            sum_gy += gyv;
            sum_gy_xh += gyv * local.normalized.at(c, i);
            g.bias[li].data[c] += gyv;
          }
          g.weight[li].data[c] += sum_gy_xh;
          const double mean_gy = sum_gy / static_cast<double>(t);
          const double mean_gy_xh = sum_gy_xh / static_cast<double>(t);
          for (std::size_t i = 0; i < t; ++i) {
            const double xh = local.normalized.at(c, i);
            gx.at(c, i) =
                gamma * inv * (gy.at(c, i) - mean_gy - xh * mean_gy_xh);
          }
        }
        break;
      }
      case LayerKind::kLinear: {
        const std::size_t out = layer.weight.dim(0);
        const std::size_t in = layer.weight.dim(1);
        for (std::size_t o = 0; o < out; ++o) {
          const double gyv = gy.data[o];
          g.bias[li].data[o] += gyv;
          for (std::size_t i = 0; i < in; ++i) {
            g.weight[li].at(o, i) += gyv * local.input.data[i];
            gx.data[i] += layer.weight.at(o, i) * gyv;
          }
        }
        break;
      }
    }

    if (li == 0) {
      input_grad = std::move(gx);
    } else {
      Tensor& prev = out_grad[li - 1];
      require(prev.same_shape(gx), "internal gradient shape mismatch");
      for (std::size_t i = 0; i < gx.size(); ++i) prev.data[i] += gx.data[i];
    }
  }

  g.input = std::move(input_grad);
  return g;
}

AdamState make_adam_state(const ModelParams& p) {
  AdamState s;
  for (const auto& l : p.layers) {
    s.weight_m.emplace_back(l.weight.shape);
    s.weight_v.emplace_back(l.weight.shape);
    s.bias_m.emplace_back(l.bias.shape);
    s.bias_v.emplace_back(l.bias.shape);
  }
  return s;
}

void adam_step(ModelParams& p, const Gradients& g, AdamState& s, double lr) {
  require(g.weight.size() == p.layers.size(), "gradient/model layer mismatch");
  s.step += 1;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));

  auto update = [&](Tensor& param, const Tensor& grad, Tensor& m, Tensor& v) {
    require(param.same_shape(grad), "gradient shape mismatch in adam_step");
    for (std::size_t i = 0; i < param.size(); ++i) {
      const double gi = grad.data[i];
      m.data[i] = s.beta1 * m.data[i] + (1.0 - s.beta1) * gi;
      v.data[i] = s.beta2 * v.data[i] + (1.0 - s.beta2) * gi * gi;
      const double m_hat = m.data[i] / bc1;
      const double v_hat = v.data[i] / bc2;
      param.data[i] -= lr * m_hat / (std::sqrt(v_hat) + s.epsilon);
    }
  };

  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    update(p.layers[li].weight, g.weight[li], s.weight_m[li], s.weight_v[li]);
    update(p.layers[li].bias, g.bias[li], s.bias_m[li], s.bias_v[li]);
  }
}

void init_params(ModelParams& p, sanitone::detail::Rng& rng) {
  for (auto& l : p.layers) {
    switch (l.kind) {
      case LayerKind::kInstanceNorm:
        for (double& v : l.weight.data) v = 1.0;
        for (double& v : l.bias.data) v = 0.0;
        break;
      case LayerKind::kConv1d:
      case LayerKind::kConv1dGlu: {
        const double fan_in =
            static_cast<double>(l.weight.dim(1) * l.weight.dim(2));
        const double fan_out =
            static_cast<double>(l.weight.dim(0) * l.weight.dim(2)) /
            static_cast<double>(l.upsample);
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : l.weight.data) v = rng.uniform(-limit, limit);
        for (double& v : l.bias.data) v = 0.0;
        break;
      }
      case LayerKind::kLinear: {
        const double fan_in = static_cast<double>(l.weight.dim(1));
        const double fan_out = static_cast<double>(l.weight.dim(0));
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : l.weight.data) v = rng.uniform(-limit, limit);
        for (double& v : l.bias.data) v = 0.0;
        break;
      }
    }
  }
}

}  // namespace sanitone::nn
