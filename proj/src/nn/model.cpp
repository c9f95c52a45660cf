#include "cuneiform/nn/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cuneiform/rng.hpp"

namespace cuneiform::nn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

[[noreturn]] void layer_error(std::size_t index, const LayerSpec& layer, const std::string& what) {
  throw StructuralError("layer " + std::to_string(index) + " (" + layer_kind(layer) + "): " + what);
}

// Sixteen fixed lanes: the reduction order never changes, and the lane
// loop is plain enough for the compiler to vectorize.
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  constexpr std::size_t L = 16;
  T lane[L] = {};
  std::size_t i = 0;
  for (; i + L <= n; i += L) {
    for (std::size_t j = 0; j < L; ++j) lane[j] += a[i + j] * b[i + j];
  }
  T tail{};
  for (; i < n; ++i) tail += a[i] * b[i];
  for (std::size_t w = L / 2; w > 0; w /= 2) {
    for (std::size_t j = 0; j < w; ++j) lane[j] += lane[j + w];
  }
  return lane[0] + tail;
}

template <typename T>
void axpy(T alpha, const T* __restrict x, T* __restrict y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

struct ConvGeometry {
  int c_in, h, w, k, s, pad, oh, ow;
  std::size_t rows() const { return static_cast<std::size_t>(c_in) * k * k; }
  std::size_t cols() const { return static_cast<std::size_t>(oh) * ow; }
};

template <typename T>
ConvGeometry geometry(const Conv2d& spec, const BasicTensor<T>& in) {
  ConvGeometry g{static_cast<int>(in.extent(1)), static_cast<int>(in.extent(2)), static_cast<int>(in.extent(3)),
                 spec.kernel, spec.stride, spec.padding, 0, 0};
  g.oh = (g.h + 2 * g.pad - g.k) / g.s + 1;
  g.ow = (g.w + 2 * g.pad - g.k) / g.s + 1;
  return g;
}

// Unfolds one sample into [c_in * k * k, oh * ow]; padding reads as zero.
template <typename T>
void im2col(const ConvGeometry& g, const T* src, T* col) {
  std::size_t r = 0;
  for (int c = 0; c < g.c_in; ++c) {
    const T* plane = src + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx, ++r) {
        T* dst = col + r * g.cols();
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.s - g.pad + ky;
          T* drow = dst + static_cast<std::ptrdiff_t>(oy) * g.ow;
          if (iy < 0 || iy >= g.h) {
            std::fill(drow, drow + g.ow, T{});
            continue;
          }
          const T* srow = plane + static_cast<std::ptrdiff_t>(iy) * g.w;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.s - g.pad + kx;
            drow[ox] = ix >= 0 && ix < g.w ? srow[ix] : T{};
          }
        }
      }
    }
  }
}

// Adds the columns back onto the sample they were unfolded from.
template <typename T>
void col2im(const ConvGeometry& g, const T* col, T* dst) {
  std::size_t r = 0;
  for (int c = 0; c < g.c_in; ++c) {
    T* plane = dst + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ky = 0; ky < g.k; ++ky) {
      for (int kx = 0; kx < g.k; ++kx, ++r) {
        const T* src = col + r * g.cols();
        for (int oy = 0; oy < g.oh; ++oy) {
          const int iy = oy * g.s - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          const T* srow = src + static_cast<std::ptrdiff_t>(oy) * g.ow;
          T* drow = plane + static_cast<std::ptrdiff_t>(iy) * g.w;
          for (int ox = 0; ox < g.ow; ++ox) {
            const int ix = ox * g.s - g.pad + kx;
            if (ix >= 0 && ix < g.w) drow[ix] += srow[ox];
          }
        }
      }
    }
  }
}

// c[i][p] = init[i] + sum_k a(i, k) * b[k][p], with a(i, k) = a[i * ai + k * ak]
// and init = 0 when null. Tiled so the running rows stay in L1; every
// output still accumulates init first and then k in ascending order.
template <typename T>
void gemm_rows(const T* a, std::size_t ai, std::size_t ak, const T* b, T* c, std::size_t rows, std::size_t inner,
               std::size_t cols, const T* init) {
  constexpr std::size_t kTile = 256;
  constexpr std::size_t kBlock = 8;
  T acc[kBlock][kTile];
  for (std::size_t p0 = 0; p0 < cols; p0 += kTile) {
    const std::size_t pn = std::min(kTile, cols - p0);
    for (std::size_t i0 = 0; i0 < rows; i0 += kBlock) {
      const std::size_t in = std::min(kBlock, rows - i0);
      for (std::size_t i = 0; i < in; ++i) std::fill(acc[i], acc[i] + pn, init ? init[i0 + i] : T{});
      for (std::size_t k = 0; k < inner; ++k) {
        const T* brow = b + k * cols + p0;
        for (std::size_t i = 0; i < in; ++i) axpy(a[(i0 + i) * ai + k * ak], brow, acc[i], pn);
      }
      for (std::size_t i = 0; i < in; ++i) std::copy(acc[i], acc[i] + pn, c + (i0 + i) * cols + p0);
    }
  }
}

template <typename T>
BasicTensor<T> conv_forward(const Conv2d& spec, const LayerParams<T>& p, const BasicTensor<T>& in) {
  const auto g = geometry(spec, in);
  const std::size_t n_batch = in.extent(0);
  const auto c_out = static_cast<std::size_t>(spec.out_channels);
  BasicTensor<T> out({n_batch, c_out, static_cast<std::size_t>(g.oh), static_cast<std::size_t>(g.ow)});
  std::vector<T> col(g.rows() * g.cols());
  const std::size_t in_stride = static_cast<std::size_t>(g.c_in) * g.h * g.w;
  for (std::size_t n = 0; n < n_batch; ++n) {
    im2col(g, in.data() + n * in_stride, col.data());
    gemm_rows(p.weight.data(), g.rows(), std::size_t{1}, col.data(), out.data() + n * c_out * g.cols(), c_out, g.rows(),
              g.cols(), p.bias.data());
  }
  return out;
}

template <typename T>
void conv_backward(const Conv2d& spec, const LayerParams<T>& p, const BasicTensor<T>& in, const BasicTensor<T>& grad,
                   LayerParams<T>& dp, BasicTensor<T>& din) {
  const auto g = geometry(spec, in);
  const std::size_t n_batch = in.extent(0);
  const auto c_out = static_cast<std::size_t>(spec.out_channels);
  const std::size_t rows = g.rows();
  const std::size_t cols = g.cols();
  std::vector<T> col(rows * cols);
  std::vector<T> dcol(rows * cols);
  const std::size_t in_stride = static_cast<std::size_t>(g.c_in) * g.h * g.w;
  constexpr std::size_t kBlock = 8;
  for (std::size_t n = 0; n < n_batch; ++n) {
    const T* gn = grad.data() + n * c_out * cols;
    im2col(g, in.data() + n * in_stride, col.data());
    for (std::size_t o = 0; o < c_out; ++o) {
      const T* gp = gn + o * cols;
      T bsum{};
      for (std::size_t i = 0; i < cols; ++i) bsum += gp[i];
      dp.bias[o] += bsum;
    }
    // dW[o][r] += <g[o], col[r]>, blocked over r so the col rows stay cached
    for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
      const std::size_t r1 = std::min(rows, r0 + kBlock);
      for (std::size_t o = 0; o < c_out; ++o) {
        T* dwrow = dp.weight.data() + o * rows;
        for (std::size_t r = r0; r < r1; ++r) dwrow[r] += dot(gn + o * cols, col.data() + r * cols, cols);
      }
    }
    // dcol[r][p] = sum_o W[o][r] * g[o][p]
    gemm_rows(p.weight.data(), std::size_t{1}, rows, gn, dcol.data(), rows, c_out, cols, static_cast<const T*>(nullptr));
    col2im(g, dcol.data(), din.data() + n * in_stride);
  }
}

template <typename T>
BasicTensor<T> pool_forward(const MaxPool& spec, const BasicTensor<T>& in, std::vector<std::uint32_t>& argmax) {
  const std::size_t n_batch = in.extent(0);
  const std::size_t c = in.extent(1);
  const int h = static_cast<int>(in.extent(2));
  const int w = static_cast<int>(in.extent(3));
  const int oh = (h - spec.window) / spec.stride + 1;
  const int ow = (w - spec.window) / spec.stride + 1;
  BasicTensor<T> out({n_batch, c, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow)});
  argmax.assign(out.size(), 0);
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n_batch * c; ++plane) {
    const std::size_t base = plane * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = base + static_cast<std::size_t>(oy * spec.stride) * w + static_cast<std::size_t>(ox * spec.stride);
        for (int dy = 0; dy < spec.window; ++dy) {
          for (int dx = 0; dx < spec.window; ++dx) {
            const std::size_t i = base + static_cast<std::size_t>(oy * spec.stride + dy) * w +
                                  static_cast<std::size_t>(ox * spec.stride + dx);
            if (in[i] > in[best]) best = i;
          }
        }
        out[o] = in[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return out;
}

template <typename T>
void dense_forward(const LayerParams<T>& p, const BasicTensor<T>& in, BasicTensor<T>& out) {
  const std::size_t n_batch = in.extent(0);
  const std::size_t d = in.extent(1);
  const std::size_t units = p.weight.extent(0);
  // unit-major so each weight row stays cached across the batch
  for (std::size_t u = 0; u < units; ++u) {
    const T* wrow = p.weight.data() + u * d;
    for (std::size_t n = 0; n < n_batch; ++n) out[n * units + u] = p.bias[u] + dot(wrow, in.data() + n * d, d);
  }
}

template <typename T>
void dense_backward(const LayerParams<T>& p, const BasicTensor<T>& in, const BasicTensor<T>& g, LayerParams<T>& dp,
                    BasicTensor<T>& din) {
  const std::size_t n_batch = in.extent(0);
  const std::size_t d = in.extent(1);
  const std::size_t units = p.weight.extent(0);
  for (std::size_t u = 0; u < units; ++u) {
    const T* wrow = p.weight.data() + u * d;
    T* dwrow = dp.weight.data() + u * d;
    for (std::size_t n = 0; n < n_batch; ++n) {
      const T gu = g[n * units + u];
      if (gu == T{}) continue;
      dp.bias[u] += gu;
      axpy(gu, in.data() + n * d, dwrow, d);
      axpy(gu, wrow, din.data() + n * d, d);
    }
  }
}

Shape batched(std::size_t n, const Shape& per_sample) {
  Shape s{n};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

void check_params(const ModelConfig& config, const auto& params) {
  const auto shapes = parameter_shapes(config);
  if (params.layers.size() != shapes.size()) {
    throw StructuralError("parameter set has " + std::to_string(params.layers.size()) + " layers but the model has " +
                          std::to_string(shapes.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& lp = params.layers[i];
    if (shapes[i].empty()) {
      if (!lp.empty()) layer_error(i, config.layers[i], "unexpected parameters");
      continue;
    }
    if (lp.weight.shape() != shapes[i][0] || lp.bias.shape() != shapes[i][1]) {
      layer_error(i, config.layers[i], "parameter shapes " + to_string(lp.weight.shape()) + "/" +
                                           to_string(lp.bias.shape()) + " do not match " + to_string(shapes[i][0]) +
                                           "/" + to_string(shapes[i][1]));
    }
  }
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

const char* layer_kind(const LayerSpec& layer) noexcept {
  return std::visit(overloaded{[](const Conv2d&) { return "conv2d"; }, [](const MaxPool&) { return "maxpool"; },
                               [](const Relu&) { return "relu"; }, [](const Flatten&) { return "flatten"; },
                               [](const Dense&) { return "dense"; }, [](const Softmax&) { return "softmax"; }},
                    layer);
}

std::vector<LayerSpec> default_layers(int num_classes) {
  return {Conv2d{16, 3, 1, 1}, Relu{}, MaxPool{2, 2}, Conv2d{32, 3, 1, 1}, Relu{}, MaxPool{2, 2},
          Flatten{},           Dense{128}, Relu{},    Dense{num_classes}, Softmax{}};
}

ModelConfig default_config(int num_classes, int input_side, std::uint64_t init_seed) {
  ModelConfig c;
  c.input_side = input_side;
  c.input_channels = 1;
  c.num_classes = num_classes;
  c.layers = default_layers(num_classes);
  c.init_seed = init_seed;
  return c;
}

std::vector<Shape> infer_shapes(const ModelConfig& config) {
  if (config.input_side < 1 || config.input_channels < 1) throw StructuralError("model input extents must be positive");
  if (config.num_classes < 1) throw StructuralError("model must have at least one class");
  if (config.layers.empty()) throw StructuralError("model has no layers");
  if (!config.class_names.empty() && config.class_names.size() != static_cast<std::size_t>(config.num_classes)) {
    throw StructuralError("class name count does not match num_classes");
  }
  std::vector<Shape> shapes;
  Shape cur{static_cast<std::size_t>(config.input_channels), static_cast<std::size_t>(config.input_side),
            static_cast<std::size_t>(config.input_side)};
  int last_dense_units = -1;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto& layer = config.layers[i];
    shapes.push_back(cur);
    std::visit(overloaded{
                   [&](const Conv2d& c) {
                     if (cur.size() != 3) layer_error(i, layer, "expects a [C,H,W] input, got " + to_string(cur));
                     if (c.out_channels < 1 || c.kernel < 1 || c.stride < 1 || c.padding < 0) {
                       layer_error(i, layer, "requires out_channels, kernel, stride >= 1 and padding >= 0");
                     }
                     const auto h = static_cast<long>(cur[1]) + 2L * c.padding;
                     const auto w = static_cast<long>(cur[2]) + 2L * c.padding;
                     if (h < c.kernel || w < c.kernel) layer_error(i, layer, "kernel larger than padded input " + to_string(cur));
                     cur = {static_cast<std::size_t>(c.out_channels), static_cast<std::size_t>((h - c.kernel) / c.stride + 1),
                            static_cast<std::size_t>((w - c.kernel) / c.stride + 1)};
                   },
                   [&](const MaxPool& p) {
                     if (cur.size() != 3) layer_error(i, layer, "expects a [C,H,W] input, got " + to_string(cur));
                     if (p.window < 1 || p.stride < 1) layer_error(i, layer, "window and stride must be >= 1");
                     if (cur[1] < static_cast<std::size_t>(p.window) || cur[2] < static_cast<std::size_t>(p.window)) {
                       layer_error(i, layer, "window larger than input " + to_string(cur));
                     }
                     cur = {cur[0], (cur[1] - static_cast<std::size_t>(p.window)) / static_cast<std::size_t>(p.stride) + 1,
                            (cur[2] - static_cast<std::size_t>(p.window)) / static_cast<std::size_t>(p.stride) + 1};
                   },
                   [&](const Relu&) {},
                   [&](const Flatten&) { cur = {element_count(cur)}; },
                   [&](const Dense& d) {
                     if (cur.size() != 1) layer_error(i, layer, "expects a flat input, got " + to_string(cur));
                     if (d.units < 1) layer_error(i, layer, "units must be >= 1");
                     cur = {static_cast<std::size_t>(d.units)};
                     last_dense_units = d.units;
                   },
                   [&](const Softmax&) {
                     if (i + 1 != config.layers.size()) layer_error(i, layer, "softmax is only allowed as the final layer");
                     if (cur.size() != 1) layer_error(i, layer, "expects a flat input, got " + to_string(cur));
                   },
               },
               layer);
  }
  shapes.push_back(cur);
  if (cur.size() != 1 || cur[0] != static_cast<std::size_t>(config.num_classes) ||
      last_dense_units != config.num_classes) {
    throw StructuralError("the final dense layer must produce num_classes = " + std::to_string(config.num_classes) +
                          " outputs, got " + to_string(cur));
  }
  return shapes;
}

std::vector<std::vector<Shape>> parameter_shapes(const ModelConfig& config) {
  const auto shapes = infer_shapes(config);
  std::vector<std::vector<Shape>> out(config.layers.size());
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    if (const auto* c = std::get_if<Conv2d>(&config.layers[i])) {
      const auto k = static_cast<std::size_t>(c->kernel);
      out[i] = {{static_cast<std::size_t>(c->out_channels), shapes[i][0], k, k}, {static_cast<std::size_t>(c->out_channels)}};
    } else if (const auto* d = std::get_if<Dense>(&config.layers[i])) {
      out[i] = {{static_cast<std::size_t>(d->units), shapes[i][0]}, {static_cast<std::size_t>(d->units)}};
    }
  }
  return out;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& config) {
  const auto shapes = parameter_shapes(config);
  ModelParams<T> params;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    LayerParams<T> lp;
    if (!shapes[i].empty()) {
      const auto& ws = shapes[i][0];
      const std::size_t fan_in = element_count(ws) / ws[0];
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      Rng rng(mix(config.init_seed, i));
      lp.weight = BasicTensor<T>(ws);
      for (auto& v : lp.weight.values()) v = static_cast<T>(rng.uniform(-bound, bound));
      lp.bias = BasicTensor<T>(shapes[i][1]);
    }
    params.layers.push_back(std::move(lp));
  }
  return params;
}

template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& params) {
  ModelParams<T> z;
  for (const auto& l : params.layers) {
    LayerParams<T> lz;
    if (!l.empty()) {
      lz.weight = BasicTensor<T>(l.weight.shape());
      lz.bias = BasicTensor<T>(l.bias.shape());
    }
    z.layers.push_back(std::move(lz));
  }
  return z;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
  if (logits.rank() != 2) throw StructuralError("softmax expects [N, C], got " + to_string(logits.shape()));
  BasicTensor<T> out(logits.shape());
  const std::size_t n = logits.extent(0);
  const std::size_t c = logits.extent(1);
  for (std::size_t r = 0; r < n; ++r) {
    const T* x = logits.data() + r * c;
    T* y = out.data() + r * c;
    const T m = *std::max_element(x, x + c);
    double sum = 0;
    for (std::size_t j = 0; j < c; ++j) {
      y[j] = static_cast<T>(std::exp(static_cast<double>(x[j] - m)));
      sum += y[j];
    }
    for (std::size_t j = 0; j < c; ++j) y[j] = static_cast<T>(y[j] / sum);
  }
  return out;
}

template <typename T>
ForwardCache<T> forward(const ModelConfig& config, const ModelParams<T>& params, const BasicTensor<T>& batch) {
  const auto shapes = infer_shapes(config);
  check_params(config, params);
  if (batch.rank() != 4 || batch.shape() != batched(batch.extent(0), shapes.front())) {
    throw StructuralError("input batch " + to_string(batch.shape()) + " does not match the model input " +
                          to_string(shapes.front()));
  }
  ForwardCache<T> cache;
  cache.batch = batch.extent(0);
  cache.argmax.resize(config.layers.size());
  BasicTensor<T> cur = batch;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const auto& layer = config.layers[i];
    const Shape out_shape = batched(cache.batch, shapes[i + 1]);
    cache.inputs.push_back(cur);
    if (std::holds_alternative<Softmax>(layer)) cache.logits = cur;
    cur = std::visit(overloaded{
                         [&](const Conv2d& c) { return conv_forward(c, params.layers[i], cur); },
                         [&](const MaxPool& p) { return pool_forward(p, cur, cache.argmax[i]); },
                         [&](const Relu&) {
                           BasicTensor<T> y = cur;
                           for (auto& v : y.values()) v = v > T{} ? v : T{};
                           return y;
                         },
                         [&](const Flatten&) { return cur.reshaped(out_shape); },
                         [&](const Dense&) {
                           BasicTensor<T> y(out_shape);
                           dense_forward(params.layers[i], cur, y);
                           return y;
                         },
                         [&](const Softmax&) { return softmax(cur); },
                     },
                     layer);
  }
  if (cache.logits.empty()) cache.logits = cur;
  cache.output = std::move(cur);
  return cache;
}

template <typename T>
Gradients<T> backward(const ModelConfig& config, const ModelParams<T>& params, const ForwardCache<T>& cache,
                      const BasicTensor<T>& grad) {
  check_params(config, params);
  if (cache.inputs.size() != config.layers.size()) {
    throw StructuralError("forward cache holds " + std::to_string(cache.inputs.size()) + " layers but the model has " +
                          std::to_string(config.layers.size()));
  }
  if (grad.shape() != cache.logits.shape()) {
    throw StructuralError("output gradient " + to_string(grad.shape()) + " does not match the logits " +
                          to_string(cache.logits.shape()));
  }
  Gradients<T> out;
  out.params = zeros_like(params);
  BasicTensor<T> g = grad;
  std::size_t top = config.layers.size();
  if (std::holds_alternative<Softmax>(config.layers.back())) --top;

  for (std::size_t i = top; i-- > 0;) {
    const auto& layer = config.layers[i];
    const BasicTensor<T>& in = cache.inputs[i];
    g = std::visit(overloaded{
                       [&](const Conv2d& c) {
                         BasicTensor<T> din(in.shape());
                         conv_backward(c, params.layers[i], in, g, out.params.layers[i], din);
                         return din;
                       },
                       [&](const MaxPool&) {
                         BasicTensor<T> din(in.shape());
                         const auto& winners = cache.argmax[i];
                         for (std::size_t o = 0; o < winners.size(); ++o) din[winners[o]] += g[o];
                         return din;
                       },
                       [&](const Relu&) {
                         BasicTensor<T> din = g;
                         for (std::size_t j = 0; j < din.size(); ++j) {
                           if (!(in[j] > T{})) din[j] = T{};
                         }
                         return din;
                       },
                       [&](const Flatten&) { return std::move(g).reshaped(in.shape()); },
                       [&](const Dense&) {
                         BasicTensor<T> din(in.shape());
                         dense_backward(params.layers[i], in, g, out.params.layers[i], din);
                         return din;
                       },
                       [&](const Softmax&) -> BasicTensor<T> {
                         throw StructuralError("softmax must be the final layer");
                       },
                   },
                   layer);
  }
  out.input = std::move(g);
  return out;
}

template <typename T>
LossResult<T> cross_entropy(const BasicTensor<T>& probabilities, const std::vector<std::size_t>& labels) {
  if (probabilities.rank() != 2) throw InputError("cross_entropy expects [N, C] probabilities");
  const std::size_t n = probabilities.extent(0);
  const std::size_t c = probabilities.extent(1);
  if (labels.size() != n) {
    throw InputError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) + " rows");
  }
  LossResult<T> r;
  r.grad_logits = BasicTensor<T>(probabilities.shape());
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= c) throw InputError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(c) + ")");
    const T* p = probabilities.data() + i * c;
    double row = 0;
    for (std::size_t j = 0; j < c; ++j) row += p[j];
    if (std::abs(row - 1.0) > 1e-5) throw InputError("probability row " + std::to_string(i) + " does not sum to 1");
    const double pl = std::max(static_cast<double>(p[labels[i]]), static_cast<double>(std::numeric_limits<T>::min()));
    total -= std::log(pl);
    for (std::size_t j = 0; j < c; ++j) {
      const double onehot = j == labels[i] ? 1.0 : 0.0;
      r.grad_logits[i * c + j] = static_cast<T>((p[j] - onehot) / static_cast<double>(n));
    }
  }
  r.loss = total / static_cast<double>(n);
  return r;
}

#define CUNEIFORM_INSTANTIATE(T)                                                                                 \
  template struct ModelParams<T>;                                                                                \
  template ModelParams<T> init_params<T>(const ModelConfig&);                                                    \
  template ModelParams<T> zeros_like<T>(const ModelParams<T>&);                                                  \
  template BasicTensor<T> softmax<T>(const BasicTensor<T>&);                                                     \
  template ForwardCache<T> forward<T>(const ModelConfig&, const ModelParams<T>&, const BasicTensor<T>&);         \
  template Gradients<T> backward<T>(const ModelConfig&, const ModelParams<T>&, const ForwardCache<T>&,          \
                                    const BasicTensor<T>&);                                                      \
  template LossResult<T> cross_entropy<T>(const BasicTensor<T>&, const std::vector<std::size_t>&);

CUNEIFORM_INSTANTIATE(float)
CUNEIFORM_INSTANTIATE(double)

#undef CUNEIFORM_INSTANTIATE

}  // namespace cuneiform::nn
