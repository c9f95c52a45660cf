#include "cuneiform/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cuneiform/rng.hpp"

namespace cuneiform::nn {

namespace {

// Which side of every relu hinge and which max-pool winner the forward pass
// used. A finite-difference stencil is only valid when this does not move.
struct Pattern {
  std::vector<std::uint8_t> relu;
  std::vector<std::uint32_t> pools;
  bool operator==(const Pattern&) const = default;
};

Pattern pattern_of(const ModelConfig& config, const ForwardCache<double>& cache) {
  Pattern p;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    if (std::holds_alternative<Relu>(config.layers[i])) {
      for (double v : cache.inputs[i].values()) p.relu.push_back(v > 0 ? 1 : 0);
    } else if (std::holds_alternative<MaxPool>(config.layers[i])) {
      p.pools.insert(p.pools.end(), cache.argmax[i].begin(), cache.argmax[i].end());
    }
  }
  return p;
}

std::vector<std::size_t> pick_coords(std::size_t n, int limit, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit <= 0 || n <= static_cast<std::size_t>(limit)) return idx;
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(static_cast<std::size_t>(limit));
  std::sort(idx.begin(), idx.end());
  return idx;
}

double rel_error(double a, double n, double floor) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

}  // namespace

double mean_cross_entropy(const BasicTensor<double>& logits, const std::vector<std::size_t>& labels) {
  const std::size_t n = logits.extent(0);
  const std::size_t c = logits.extent(1);
  double total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* z = logits.data() + i * c;
    const double top = *std::max_element(z, z + c);
    double sum = 0;
    for (std::size_t j = 0; j < c; ++j) sum += std::exp(z[j] - top);
    total += top + std::log(sum) - z[labels.at(i)];
  }
  return total / static_cast<double>(n);
}

GradcheckReport gradcheck(const ModelConfig& config, const GradcheckOptions& options) {
  infer_shapes(config);
  if (options.step <= 0 || options.batch < 1) throw ConfigError("gradcheck needs step > 0 and batch >= 1");
  Rng rng(options.seed);

  auto params = init_params<double>(config);
  for (auto& lp : params.layers) {
    for (auto& b : lp.bias.values()) b = rng.uniform(-0.1, 0.1);
  }
  const auto n = static_cast<std::size_t>(options.batch);
  const auto side = static_cast<std::size_t>(config.input_side);
  BasicTensor<double> batch({n, static_cast<std::size_t>(config.input_channels), side, side});
  for (auto& v : batch.values()) v = rng.uniform();
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = rng.below(static_cast<std::uint64_t>(config.num_classes));

  auto cache = forward(config, params, batch);
  const Pattern base = pattern_of(config, cache);
  const auto probs = softmax(cache.logits);
  auto grads = backward(config, params, cache, cross_entropy(probs, labels).grad_logits);
  if (options.corrupt) options.corrupt(grads.params);

  auto loss_at = [&](const ModelParams<double>& p, const BasicTensor<double>& x, Pattern& pat) {
    const auto c = forward(config, p, x);
    pat = pattern_of(config, c);
    return mean_cross_entropy(c.logits, labels);
  };

  // Central difference at one coordinate, shrinking the step when the
  // stencil straddles a kink. Returns false when no step avoids one.
  auto numeric = [&](double& slot, auto&& eval, double& out) {
    const double saved = slot;
    Pattern pp, pm;
    for (double h = options.step; h >= options.step * 1e-2; h /= 10) {
      slot = saved + h;
      const double lp = eval(pp);
      slot = saved - h;
      const double lm = eval(pm);
      slot = saved;
      if (pp == base && pm == base) {
        out = (lp - lm) / (2 * h);
        return true;
      }
    }
    return false;
  };

  GradcheckReport report;
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    if (params.layers[i].empty()) continue;
    for (int which = 0; which < 2; ++which) {
      auto& tensor = which == 0 ? params.layers[i].weight : params.layers[i].bias;
      const auto& analytic = which == 0 ? grads.params.layers[i].weight : grads.params.layers[i].bias;
      TensorCheck tc{i, layer_kind(config.layers[i]), which == 0 ? "weight" : "bias"};
      for (auto k : pick_coords(tensor.size(), options.coords_per_tensor, rng)) {
        double num = 0;
        if (!numeric(tensor[k], [&](Pattern& pat) { return loss_at(params, batch, pat); }, num)) {
          ++tc.skipped;
          continue;
        }
        ++tc.checked;
        tc.max_rel_error = std::max(tc.max_rel_error, rel_error(analytic[k], num, options.floor));
      }
      report.max_rel_error = std::max(report.max_rel_error, tc.max_rel_error);
      report.tensors.push_back(tc);
    }
  }
  for (auto k : pick_coords(batch.size(), options.coords_per_tensor, rng)) {
    double num = 0;
    if (!numeric(batch[k], [&](Pattern& pat) { return loss_at(params, batch, pat); }, num)) continue;
    report.input_max_rel_error = std::max(report.input_max_rel_error, rel_error(grads.input[k], num, options.floor));
  }
  report.passed = report.max_rel_error <= options.tolerance && report.input_max_rel_error <= options.tolerance;
  return report;
}

ModelConfig random_small_config(std::uint64_t seed) {
  Rng rng(mix(seed, 0x6772));
  auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); };
  for (;;) {
    ModelConfig c;
    c.input_side = pick(5, 9);
    c.input_channels = pick(1, 2);
    c.num_classes = pick(2, 4);
    c.init_seed = rng.next();
    const Conv2d conv{pick(2, 3), pick(1, 3), pick(1, 2), pick(0, 1)};
    switch (seed % 4) {
      case 0:
        c.layers = {conv, Relu{}, MaxPool{2, 2}, Flatten{}, Dense{pick(3, 5)}, Relu{}, Dense{c.num_classes}, Softmax{}};
        break;
      case 1:
        c.layers = {conv, Relu{}, Conv2d{pick(2, 3), pick(1, 3), 1, pick(0, 1)}, Relu{}, Flatten{}, Dense{c.num_classes},
                    Softmax{}};
        break;
      case 2:
        c.layers = {MaxPool{pick(2, 3), pick(1, 2)}, Flatten{}, Dense{pick(3, 5)}, Relu{}, Dense{c.num_classes}};
        break;
      default:
        c.layers = {conv, Relu{}, MaxPool{2, 1}, Flatten{}, Dense{c.num_classes}, Softmax{}};
        break;
    }
    try {
      infer_shapes(c);
      return c;
    } catch (const StructuralError&) {
      // a draw that shrinks the map below a window; draw again
    }
  }
}

}  // namespace cuneiform::nn
