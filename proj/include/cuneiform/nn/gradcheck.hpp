#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cuneiform/nn/model.hpp"

namespace cuneiform::nn {

struct GradcheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  // Denominator floor for the relative error, so entries that are zero on
  // both sides do not divide noise by noise.
  double floor = 1e-7;
  int batch = 4;
  // Coordinates checked per parameter tensor (0 = all of them).
  int coords_per_tensor = 0;
  std::uint64_t seed = 1;
  // Test hook: called on the analytic gradients before comparison.
  std::function<void(ModelParams<double>&)> corrupt;
};

struct TensorCheck {
  std::size_t layer = 0;
  std::string kind;
  std::string tensor;  // "weight" or "bias"
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates whose stencil crosses a relu/max-pool switch
  double max_rel_error = 0;
};

struct GradcheckReport {
  std::vector<TensorCheck> tensors;
  double max_rel_error = 0;
  double input_max_rel_error = 0;
  bool passed = false;
};

// Mean cross-entropy of the softmax of the logits, in double.
double mean_cross_entropy(const BasicTensor<double>& logits, const std::vector<std::size_t>& labels);

// Compares backward() against central differences of the loss on a seeded
// random batch, for every parameter tensor and for the input.
GradcheckReport gradcheck(const ModelConfig& config, const GradcheckOptions& options = {});

// A small random stack drawn from the seed. Consecutive seeds cycle through
// four layouts so that every layer kind gets exercised.
ModelConfig random_small_config(std::uint64_t seed);

}  // namespace cuneiform::nn
