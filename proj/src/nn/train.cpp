#include "cuneiform/nn/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "cuneiform/rng.hpp"

namespace cuneiform::nn {

namespace {

Tensor gather(const LabeledSet& set, std::span<const std::size_t> rows, std::vector<std::size_t>& labels) {
  const Shape& s = set.images.shape();
  const std::size_t stride = s[1] * s[2] * s[3];
  std::vector<float> data(rows.size() * stride);
  labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(set.images.data() + rows[i] * stride, stride, data.data() + i * stride);
    labels[i] = set.labels[rows[i]];
  }
  return Tensor({rows.size(), s[1], s[2], s[3]}, std::move(data));
}

Tensor probabilities_of(const ModelConfig& config, const ForwardCache<float>& cache) {
  if (std::holds_alternative<Softmax>(config.layers.back())) return cache.output;
  return softmax(cache.output);
}

void check_set(const ModelConfig& config, const LabeledSet& set, const char* name) {
  if (set.size() == 0) throw InputError(std::string(name) + " set is empty");
  for (auto l : set.labels) {
    if (l >= static_cast<std::size_t>(config.num_classes)) {
      throw InputError(std::string(name) + " set label " + std::to_string(l) + " exceeds the model's class count");
    }
  }
}

}  // namespace

template <typename T>
AdamState<T> make_adam(const ModelParams<T>& params, double lr, double beta1, double beta2, double epsilon) {
  AdamState<T> s;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  return s;
}

template <typename T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& state) {
  if (grads.layers.size() != params.layers.size() || state.m.layers.size() != params.layers.size()) {
    throw StructuralError("adam_step: gradient/state layer count differs from the parameters");
  }
  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    const auto& g = grads.layers[i];
    if (g.weight.shape() != params.layers[i].weight.shape() || g.bias.shape() != params.layers[i].bias.shape()) {
      throw StructuralError("adam_step: gradient shapes differ from parameters at layer " + std::to_string(i));
    }
    for (const auto* t : {&g.weight, &g.bias}) {
      for (auto v : t->values()) {
        if (!std::isfinite(static_cast<double>(v))) {
          throw TrainingError("non-finite gradient in layer " + std::to_string(i));
        }
      }
    }
  }

  ++state.t;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    auto& p = params.layers[i];
    if (p.empty()) continue;
    auto update = [&](BasicTensor<T>& w, const BasicTensor<T>& g, BasicTensor<T>& m, BasicTensor<T>& v) {
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double gj = g[j];
        const double mj = b1 * m[j] + (1.0 - b1) * gj;
        const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        const double mhat = mj / c1;
        const double vhat = vj / c2;
        w[j] = static_cast<T>(w[j] - state.lr * mhat / (std::sqrt(vhat) + state.epsilon));
      }
    };
    update(p.weight, grads.layers[i].weight, state.m.layers[i].weight, state.v.layers[i].weight);
    update(p.bias, grads.layers[i].bias, state.m.layers[i].bias, state.v.layers[i].bias);
  }
}

template AdamState<float> make_adam(const ModelParams<float>&, double, double, double, double);
template AdamState<double> make_adam(const ModelParams<double>&, double, double, double, double);
template void adam_step(ModelParams<float>&, const ModelParams<float>&, AdamState<float>&);
template void adam_step(ModelParams<double>&, const ModelParams<double>&, AdamState<double>&);

void TrainConfig::validate() const {
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train.patience must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("train.epsilon must be > 0");
  if (!(min_improvement >= 0.0)) throw ConfigError("train.min_improvement must be >= 0");
}

bool TrainLog::same_trajectory(const TrainLog& other) const {
  if (epochs.size() != other.epochs.size() || best_epoch != other.best_epoch || stopped_early != other.stopped_early) {
    return false;
  }
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& a = epochs[i];
    const auto& b = other.epochs[i];
    if (a.epoch != b.epoch || a.train_loss != b.train_loss || a.val_loss != b.val_loss ||
        a.val_accuracy != b.val_accuracy) {
      return false;
    }
  }
  return true;
}

Tensor glyph_tensor(const segmentation::GlyphImage& glyph) {
  const auto side = static_cast<std::size_t>(glyph.side());
  std::vector<float> data(side * side);
  const auto px = glyph.bits().pixels();
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = px[i] ? 1.0f : 0.0f;
  return Tensor({1, 1, side, side}, std::move(data));
}

LabeledSet to_labeled_set(const std::vector<dataset::Sample>& samples) {
  if (samples.empty()) return {};
  const auto side = static_cast<std::size_t>(samples.front().image.side());
  std::vector<float> data(samples.size() * side * side);
  LabeledSet set;
  set.labels.reserve(samples.size());
  for (std::size_t n = 0; n < samples.size(); ++n) {
    const auto& s = samples[n];
    if (static_cast<std::size_t>(s.image.side()) != side) throw StructuralError("samples have mixed glyph sizes");
    const auto px = s.image.bits().pixels();
    for (std::size_t i = 0; i < px.size(); ++i) data[n * side * side + i] = px[i] ? 1.0f : 0.0f;
    set.labels.push_back(s.class_id);
  }
  set.images = Tensor({samples.size(), 1, side, side}, std::move(data));
  return set;
}

Evaluation evaluate(const ModelConfig& config, const ModelParams<float>& params, const LabeledSet& set, int batch_size) {
  Evaluation ev;
  if (set.size() == 0) return ev;
  std::vector<std::size_t> rows(set.size());
  std::iota(rows.begin(), rows.end(), 0);
  double loss_sum = 0;
  std::size_t correct = 0;
  std::vector<std::size_t> labels;
  for (std::size_t start = 0; start < rows.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(batch_size), rows.size() - start);
    const auto batch = gather(set, std::span(rows).subspan(start, count), labels);
    const auto cache = forward(config, params, batch);
    const auto probs = probabilities_of(config, cache);
    loss_sum += cross_entropy(probs, labels).loss * static_cast<double>(count);
    const std::size_t c = probs.extent(1);
    for (std::size_t i = 0; i < count; ++i) {
      const auto p = argmax(std::span(probs.data() + i * c, c));
      ev.predictions.push_back(p.class_id);
      correct += p.class_id == labels[i] ? 1 : 0;
    }
  }
  ev.loss = loss_sum / static_cast<double>(set.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(set.size());
  return ev;
}

TrainResult train(const ModelConfig& config, ModelParams<float> params, const LabeledSet& train_set,
                  const LabeledSet& val_set, const TrainConfig& tconfig, const TrainHooks& hooks) {
  tconfig.validate();
  infer_shapes(config);
  check_set(config, train_set, "training");
  check_set(config, val_set, "validation");

  auto adam = make_adam(params, tconfig.learning_rate, tconfig.beta1, tconfig.beta2, tconfig.epsilon);
  TrainResult result;
  result.best_params = params;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  const auto started = std::chrono::steady_clock::now();

  std::vector<std::size_t> order(train_set.size());
  std::vector<std::size_t> labels;
  for (int epoch = 1; epoch <= tconfig.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix(tconfig.shuffle_seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span(order));

    double loss_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tconfig.batch_size)) {
      const auto count = std::min<std::size_t>(static_cast<std::size_t>(tconfig.batch_size), order.size() - start);
      const auto batch = gather(train_set, std::span(order).subspan(start, count), labels);
      const auto cache = forward(config, params, batch);
      const auto loss = cross_entropy(probabilities_of(config, cache), labels);
      if (!std::isfinite(loss.loss)) {
        throw TrainingError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      loss_sum += loss.loss * static_cast<double>(count);
      const auto grads = backward(config, params, cache, loss.grad_logits);
      adam_step(params, grads.params, adam);
    }

    const auto val = evaluate(config, params, val_set, std::max(tconfig.batch_size, 64));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_set.size());
    rec.val_loss = hooks.val_loss_override ? hooks.val_loss_override(epoch, val.loss) : val.loss;
    rec.val_accuracy = val.accuracy;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (!std::isfinite(rec.val_loss)) {
      throw TrainingError("non-finite validation loss at epoch " + std::to_string(epoch));
    }
    result.log.epochs.push_back(rec);
    if (hooks.on_log) hooks.on_log(rec);
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, params);

    if (rec.val_loss < best - tconfig.min_improvement) {
      best = rec.val_loss;
      result.log.best_epoch = epoch;
      result.best_params = params;
      stale = 0;
    } else if (++stale >= tconfig.patience) {
      result.log.stopped_early = epoch < tconfig.max_epochs;
      break;
    }
  }
  return result;
}

Prediction argmax(std::span<const float> probabilities) {
  Prediction p;
  for (std::size_t j = 0; j < probabilities.size(); ++j) {
    if (j == 0 || probabilities[j] > probabilities[p.class_id]) p.class_id = j;
  }
  if (!probabilities.empty()) p.probability = probabilities[p.class_id];
  return p;
}

std::vector<Prediction> predict_batch(const ModelConfig& config, const ModelParams<float>& params,
                                      const std::vector<segmentation::GlyphImage>& glyphs, int batch_size) {
  std::vector<Prediction> out;
  for (const auto& g : glyphs) {
    if (g.side() != config.input_side) {
      throw StructuralError("glyph side " + std::to_string(g.side()) + " does not match the model input side " +
                            std::to_string(config.input_side));
    }
  }
  const auto side = static_cast<std::size_t>(config.input_side);
  for (std::size_t start = 0; start < glyphs.size(); start += static_cast<std::size_t>(batch_size)) {
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(batch_size), glyphs.size() - start);
    std::vector<float> data(count * side * side);
    for (std::size_t n = 0; n < count; ++n) {
      const auto px = glyphs[start + n].bits().pixels();
      for (std::size_t i = 0; i < px.size(); ++i) data[n * side * side + i] = px[i] ? 1.0f : 0.0f;
    }
    const auto cache = forward(config, params, Tensor({count, 1, side, side}, std::move(data)));
    const auto probs = probabilities_of(config, cache);
    const std::size_t c = probs.extent(1);
    for (std::size_t n = 0; n < count; ++n) out.push_back(argmax(std::span(probs.data() + n * c, c)));
  }
  return out;
}

Prediction predict(const ModelConfig& config, const ModelParams<float>& params, const segmentation::GlyphImage& glyph) {
  return predict_batch(config, params, {glyph}, 1).front();
}

}  // namespace cuneiform::nn
