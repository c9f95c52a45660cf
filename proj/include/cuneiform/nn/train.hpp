#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cuneiform/dataset.hpp"
#include "cuneiform/nn/model.hpp"
#include "cuneiform/segmentation.hpp"

namespace cuneiform::nn {

// Adam moments and hyperparameters. Defaults follow Kingma & Ba.
template <typename T>
struct AdamState {
  ModelParams<T> m;
  ModelParams<T> v;
  std::uint64_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename T>
AdamState<T> make_adam(const ModelParams<T>& params, double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                       double epsilon = 1e-8);

// One bias-corrected Adam update. Throws TrainingError naming the layer if a
// gradient entry is not finite; params are left untouched in that case.
template <typename T>
void adam_step(ModelParams<T>& params, const ModelParams<T>& grads, AdamState<T>& state);

struct TrainConfig {
  int max_epochs = 50;
  int patience = 5;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t shuffle_seed = 5;
  double min_improvement = 1e-6;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  double wall_seconds = 0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  bool stopped_early = false;

  // Compares everything except wall time.
  bool same_trajectory(const TrainLog& other) const;
};

// Glyphs as a float tensor [N, 1, S, S] (ink = 1) plus labels.
struct LabeledSet {
  Tensor images;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
};

LabeledSet to_labeled_set(const std::vector<dataset::Sample>& samples);
Tensor glyph_tensor(const segmentation::GlyphImage& glyph);

struct TrainHooks {
  // Replaces the measured validation loss of an epoch (1-based) before the
  // early-stopping rule sees it.
  std::function<double(int epoch, double measured)> val_loss_override;
  std::function<void(int epoch, const ModelParams<float>& params)> on_epoch_end;
  std::function<void(const EpochRecord&)> on_log;
};

struct TrainResult {
  ModelParams<float> best_params;
  TrainLog log;
};

// Seeded mini-batch Adam on the mean cross-entropy. Stops after
// max_epochs or once the validation loss has failed to beat the running
// best by min_improvement for `patience` consecutive epochs, and returns
// the parameters of the best epoch.
TrainResult train(const ModelConfig& config, ModelParams<float> params, const LabeledSet& train_set,
                  const LabeledSet& val_set, const TrainConfig& tconfig, const TrainHooks& hooks = {});

struct Evaluation {
  double loss = 0;
  double accuracy = 0;
  std::vector<std::size_t> predictions;
};

Evaluation evaluate(const ModelConfig& config, const ModelParams<float>& params, const LabeledSet& set,
                    int batch_size = 64);

struct Prediction {
  std::size_t class_id = 0;
  double probability = 0;
};

// argmax of the softmax output; ties go to the lowest class id.
Prediction predict(const ModelConfig& config, const ModelParams<float>& params, const segmentation::GlyphImage& glyph);
std::vector<Prediction> predict_batch(const ModelConfig& config, const ModelParams<float>& params,
                                      const std::vector<segmentation::GlyphImage>& glyphs, int batch_size = 64);

// Argmax rule on a probability row, exposed for reuse.
Prediction argmax(std::span<const float> probabilities);

}  // namespace cuneiform::nn
