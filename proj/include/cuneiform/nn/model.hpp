#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "cuneiform/nn/tensor.hpp"

namespace cuneiform::nn {

struct Conv2d {
  int out_channels = 1;
  int kernel = 3;
  int stride = 1;
  int padding = 0;
  friend bool operator==(const Conv2d&, const Conv2d&) = default;
};

struct MaxPool {
  int window = 2;
  int stride = 2;
  friend bool operator==(const MaxPool&, const MaxPool&) = default;
};

struct Relu {
  friend bool operator==(const Relu&, const Relu&) = default;
};

struct Flatten {
  friend bool operator==(const Flatten&, const Flatten&) = default;
};

struct Dense {
  int units = 1;
  friend bool operator==(const Dense&, const Dense&) = default;
};

struct Softmax {
  friend bool operator==(const Softmax&, const Softmax&) = default;
};

using LayerSpec = std::variant<Conv2d, MaxPool, Relu, Flatten, Dense, Softmax>;

const char* layer_kind(const LayerSpec& layer) noexcept;

struct ModelConfig {
  int input_side = 64;
  int input_channels = 1;
  int num_classes = 2;
  std::vector<LayerSpec> layers;
  std::uint64_t init_seed = 1;
  std::vector<std::string> class_names;  // optional; indexed by class id

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// conv 3x3x16 -> relu -> pool 2 -> conv 3x3x32 -> relu -> pool 2 -> flatten
// -> dense 128 -> relu -> dense num_classes -> softmax. Convolutions are
// zero-padded to keep their input size.
std::vector<LayerSpec> default_layers(int num_classes);
ModelConfig default_config(int num_classes, int input_side = 64, std::uint64_t init_seed = 1);

// Per-sample activation extents entering each layer, plus the final output
// (size = layers + 1). Throws StructuralError naming the offending layer.
std::vector<Shape> infer_shapes(const ModelConfig& config);

// Parameter tensor shapes (weight, bias) per layer; empty for parameter-free layers.
std::vector<std::vector<Shape>> parameter_shapes(const ModelConfig& config);

template <typename T>
struct LayerParams {
  BasicTensor<T> weight;
  BasicTensor<T> bias;

  bool empty() const noexcept { return weight.empty(); }
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

template <typename T>
struct ModelParams {
  std::vector<LayerParams<T>> layers;

  std::size_t parameter_count() const noexcept;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases, seeded per layer.
template <typename T>
ModelParams<T> init_params(const ModelConfig& config);

// All-zero tensors shaped like the model's parameters.
template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& params);

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& params) {
  ModelParams<To> out;
  for (const auto& lp : params.layers) {
    LayerParams<To> l;
    if (!lp.empty()) {
      l.weight = BasicTensor<To>(lp.weight.shape(), std::vector<To>(lp.weight.values().begin(), lp.weight.values().end()));
      l.bias = BasicTensor<To>(lp.bias.shape(), std::vector<To>(lp.bias.values().begin(), lp.bias.values().end()));
    }
    out.layers.push_back(std::move(l));
  }
  return out;
}

template <typename T>
struct ForwardCache {
  std::vector<BasicTensor<T>> inputs;        // input to each layer
  std::vector<std::vector<std::uint32_t>> argmax;  // max-pool winners per layer
  BasicTensor<T> output;                     // final layer output
  BasicTensor<T> logits;                     // output before a trailing softmax
  std::size_t batch = 0;
};

// batch: [N, channels, side, side] with values in [0, 1].
template <typename T>
ForwardCache<T> forward(const ModelConfig& config, const ModelParams<T>& params, const BasicTensor<T>& batch);

template <typename T>
struct Gradients {
  ModelParams<T> params;
  BasicTensor<T> input;
};

// Reverse pass. When the stack ends in softmax, `grad` is taken with
// respect to the pre-softmax logits (the fused softmax/cross-entropy
// gradient); otherwise with respect to the final output.
template <typename T>
Gradients<T> backward(const ModelConfig& config, const ModelParams<T>& params, const ForwardCache<T>& cache,
                      const BasicTensor<T>& grad);

// Row-wise numerically stable softmax of [N, C].
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

template <typename T>
struct LossResult {
  double loss = 0;               // mean negative log-likelihood
  BasicTensor<T> grad_logits;    // (p - onehot) / N
};

// probabilities: [N, C] rows summing to 1 (within 1e-5).
template <typename T>
LossResult<T> cross_entropy(const BasicTensor<T>& probabilities, const std::vector<std::size_t>& labels);

}  // namespace cuneiform::nn
