#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sanitone/detail/rng.hpp"

namespace sanitone::nn {

// Row-major dense tensor. Rank 2 tensors are (channels x time) throughout.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    data.assign(n, 0.0);
  }

  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape[i]; }

  double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool finite() const;
};

enum class LayerKind { kConv1d, kConv1dGlu, kInstanceNorm, kLinear };

const char* layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(const std::string& name);

// One layer of a sequential model.
//   kConv1d:       weight [out_ch*upsample, in_ch, k], bias [out_ch*upsample]
//   kConv1dGlu:    weight [2*out_ch*upsample, in_ch, k]; first half is the
//                  linear path, second half the sigmoid gate
//   kInstanceNorm: weight = gain [C], bias = offset [C]
//   kLinear:       weight [out, in], bias [out]; input is a rank-1 tensor
// Convolutions use same padding (odd kernel), then optional sub-pixel
// upsampling that interleaves channel blocks into time.
struct Layer {
  LayerKind kind = LayerKind::kConv1d;
  std::string name;
  Tensor weight;
  Tensor bias;
  int stride = 1;
  int upsample = 1;
  int skip_add_from = -1;  // add the output of that layer index (residual)
};

struct ModelParams {
  std::vector<Layer> layers;
  std::size_t parameter_count() const;
};

// Activations recorded by forward for the exact reverse pass.
struct LayerCache {
  Tensor input;
  Tensor output;
  Tensor pre_shuffle;   // conv output before sub-pixel rearrangement
  Tensor gate_sigmoid;  // glu only
  Tensor glu_linear;    // glu only, linear half after shuffle
  Tensor normalized;    // instance norm only
  std::vector<double> inv_std;  // instance norm only
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Tensor input;
};

Tensor forward(const ModelParams& p, const Tensor& x,
               ForwardCache* cache = nullptr);

struct Gradients {
  std::vector<Tensor> weight;
  std::vector<Tensor> bias;
  Tensor input;

  void accumulate(const Gradients& other, double scale = 1.0);
  void scale_all(double s);
};

Gradients backward(const ModelParams& p, const ForwardCache& cache,
                   const Tensor& upstream);

struct AdamState {
  std::vector<Tensor> weight_m, weight_v;
  std::vector<Tensor> bias_m, bias_v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState make_adam_state(const ModelParams& p);

// Bias-corrected Adam update; increments the step counter.
void adam_step(ModelParams& p, const Gradients& g, AdamState& s, double lr);

// Glorot-scaled uniform initialization from a seeded stream; biases zero,
// instance-norm gains one.
void init_params(ModelParams& p, sanitone::detail::Rng& rng);

}  // namespace sanitone::nn
