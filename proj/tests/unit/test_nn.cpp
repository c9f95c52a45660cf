#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "cuneiform/error.hpp"
#include "cuneiform/nn/gradcheck.hpp"
#include "cuneiform/nn/model.hpp"
#include "cuneiform/nn/serialize.hpp"
#include "cuneiform/nn/train.hpp"
#include "cuneiform/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cuneiform;
using namespace cuneiform::nn;

namespace {

ModelConfig make_config(int side, int classes, std::vector<LayerSpec> layers, std::uint64_t seed = 1) {
  ModelConfig c;
  c.input_side = side;
  c.num_classes = classes;
  c.layers = std::move(layers);
  c.init_seed = seed;
  return c;
}

template <typename T>
BasicTensor<T> random_batch(Rng& rng, std::size_t n, std::size_t side) {
  BasicTensor<T> t({n, 1, side, side});
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform());
  return t;
}

// Two classes: a bright blob on the left or on the right, plus pixel noise.
LabeledSet blobs(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t side = 8;
  LabeledSet set;
  set.images = Tensor({n, 1, side, side});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    set.labels.push_back(label);
    const double cx = label ? 5.5 : 1.5;
    const double cy = 3.5 + rng.uniform(-1, 1);
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        // Box-Muller noise
        const double g = std::sqrt(-2 * std::log(1 - rng.uniform())) * std::cos(2 * M_PI * rng.uniform());
        set.images[(i * side + y) * side + x] = static_cast<float>(std::clamp(std::exp(-d2 / 4) + 0.15 * g, 0.0, 1.0));
      }
    }
  }
  return set;
}

ModelConfig blob_config() {
  return make_config(8, 2, {Conv2d{4, 3, 1, 1}, Relu{}, MaxPool{2, 2}, Flatten{}, Dense{2}, Softmax{}}, 3);
}

// Straight loops over the layer definitions, for comparison with forward().
std::vector<double> naive_forward(const ModelConfig& cfg, const ModelParams<float>& p, const Tensor& x, std::size_t n) {
  std::size_t c = 1, h = static_cast<std::size_t>(cfg.input_side), w = h;
  std::vector<double> cur(x.values().begin() + static_cast<long>(n * h * w), x.values().begin() + static_cast<long>((n + 1) * h * w));
  for (std::size_t li = 0; li < cfg.layers.size(); ++li) {
    const auto& L = cfg.layers[li];
    if (auto* cv = std::get_if<Conv2d>(&L)) {
      const int k = cv->kernel, s = cv->stride, pad = cv->padding;
      const std::size_t oc = static_cast<std::size_t>(cv->out_channels);
      const std::size_t oh = (h + 2 * pad - k) / s + 1, ow = (w + 2 * pad - k) / s + 1;
      std::vector<double> out(oc * oh * ow);
      for (std::size_t o = 0; o < oc; ++o)
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t xx = 0; xx < ow; ++xx) {
            double acc = p.layers[li].bias[o];
            for (std::size_t i = 0; i < c; ++i)
              for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                  const long iy = static_cast<long>(y) * s + ky - pad, ix = static_cast<long>(xx) * s + kx - pad;
                  if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                  acc += p.layers[li].weight[((o * c + i) * k + ky) * k + kx] * cur[(i * h + iy) * w + ix];
                }
            out[(o * oh + y) * ow + xx] = acc;
          }
      cur = out;
      c = oc, h = oh, w = ow;
    } else if (auto* mp = std::get_if<MaxPool>(&L)) {
      const std::size_t k = mp->window, s = mp->stride;
      const std::size_t oh = (h - k) / s + 1, ow = (w - k) / s + 1;
      std::vector<double> out(c * oh * ow, -1e300);
      for (std::size_t i = 0; i < c; ++i)
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t xx = 0; xx < ow; ++xx)
            for (std::size_t a = 0; a < k; ++a)
              for (std::size_t b = 0; b < k; ++b)
                out[(i * oh + y) * ow + xx] = std::max(out[(i * oh + y) * ow + xx], cur[(i * h + y * s + a) * w + xx * s + b]);
      cur = out;
      h = oh, w = ow;
    } else if (std::holds_alternative<Relu>(L)) {
      for (auto& v : cur) v = std::max(v, 0.0);
    } else if (auto* d = std::get_if<Dense>(&L)) {
      std::vector<double> out(static_cast<std::size_t>(d->units));
      for (std::size_t u = 0; u < out.size(); ++u) {
        double acc = p.layers[li].bias[u];
        for (std::size_t i = 0; i < cur.size(); ++i) acc += p.layers[li].weight[u * cur.size() + i] * cur[i];
        out[u] = acc;
      }
      cur = out;
    } else if (std::holds_alternative<Softmax>(L)) {
      double m = *std::max_element(cur.begin(), cur.end()), z = 0;
      for (auto& v : cur) z += (v = std::exp(v - m));
      for (auto& v : cur) v /= z;
    }
  }
  return cur;
}

}  // namespace

TEST_CASE("identity 1x1 convolution") {
  auto cfg = make_config(5, 2, {Conv2d{1, 1, 1, 0}, Flatten{}, Dense{2}});
  auto p = init_params<float>(cfg);
  p.layers[0].weight.fill(1.0f);
  p.layers[0].bias.fill(0.0f);
  Rng rng(1);
  const auto x = random_batch<float>(rng, 3, 5);
  const auto cache = forward(cfg, p, x);
  CHECK(cache.inputs[1].values().size() == x.size());
  CHECK(std::equal(x.values().begin(), x.values().end(), cache.inputs[1].values().begin()));
}

TEST_CASE("softmax rows") {
  const auto u = softmax(Tensor({2, 4}, 0.0f));
  for (auto v : u.values()) CHECK(v == doctest::Approx(0.25).epsilon(1e-7));

  Rng rng(2);
  Tensor logits({6, 7});
  for (auto& v : logits.values()) v = static_cast<float>(rng.uniform(-30, 30));
  const auto p = softmax(logits);
  for (std::size_t i = 0; i < 6; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 7; ++j) {
      const float v = p[i * 7 + j];
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
      s += v;
    }
    CHECK(std::abs(s - 1.0) <= 1e-5);
  }
}

TEST_CASE("max pool picks the maximum") {
  auto cfg = make_config(2, 1, {MaxPool{2, 2}, Flatten{}, Dense{1}});
  const auto p = init_params<float>(cfg);
  const auto cache = forward(cfg, p, Tensor({1, 1, 2, 2}, {1, 2, 3, 4}));
  REQUIRE(cache.inputs[1].size() == 1);
  CHECK(cache.inputs[1][0] == 4.0f);
}

TEST_CASE("cross entropy values") {
  const auto perfect = cross_entropy(Tensor({2, 3}, {0, 1, 0, 1, 0, 0}), {1, 0});
  CHECK(perfect.loss == 0.0);
  const auto uniform = cross_entropy(Tensor({3, 4}, 0.25f), {0, 1, 3});
  CHECK(uniform.loss == doctest::Approx(std::log(4.0)).epsilon(1e-7));

  // 3x5 logits; loss recomputed by hand as mean(logsumexp - z_label)
  const std::vector<double> z = {0.3, -1.2, 2.0, 0.0, 0.7, 1.5, 1.5, -0.5, 0.2, -2.0, -0.1, 0.4, 0.9, 3.1, -1.7};
  const std::vector<std::size_t> labels = {2, 0, 4};
  double want = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < 5; ++j) s += std::exp(z[i * 5 + j]);
    want += std::log(s) - z[i * 5 + labels[i]];
  }
  want /= 3;
  BasicTensor<double> zt({3, 5}, z);
  const auto r = cross_entropy(softmax(zt), labels);
  CHECK(r.loss == doctest::Approx(want).epsilon(1e-12));
  CHECK(want == doctest::Approx(2.128387411706339).epsilon(1e-12));  // independently evaluated

  CHECK_THROWS_AS(cross_entropy(Tensor({1, 3}, {0.2f, 0.3f, 0.5f}), {3}), InputError);
  CHECK_THROWS_AS(cross_entropy(Tensor({1, 3}, {0.2f, 0.3f, 0.5f}), {0, 1}), InputError);
}

TEST_CASE("zero loss gradient gives zero parameter gradients") {
  auto cfg = default_config(4, 12);
  const auto p = init_params<float>(cfg);
  Rng rng(3);
  const auto cache = forward(cfg, p, random_batch<float>(rng, 2, 12));
  const auto g = backward(cfg, p, cache, Tensor({2, 4}, 0.0f));
  for (const auto& l : g.params.layers) {
    for (auto v : l.weight.values()) CHECK(v == 0.0f);
    for (auto v : l.bias.values()) CHECK(v == 0.0f);
  }
}

TEST_CASE("dense gradient is the outer product") {
  auto cfg = make_config(2, 3, {Flatten{}, Dense{3}});
  const auto p = init_params<double>(cfg);
  const BasicTensor<double> x({1, 1, 2, 2}, {0.5, -1.0, 2.0, 0.25});
  const BasicTensor<double> g({1, 3}, {1.5, -0.5, 2.0});
  const auto grads = backward(cfg, p, forward(cfg, p, x), g);
  for (std::size_t u = 0; u < 3; ++u) {
    CHECK(grads.params.layers[1].bias[u] == g[u]);
    for (std::size_t k = 0; k < 4; ++k) CHECK(grads.params.layers[1].weight[u * 4 + k] == doctest::Approx(g[u] * x[k]));
  }
}

TEST_CASE("forward matches straight-loop recomputation") {
  auto cfg = default_config(3, 8, 4);
  cfg.layers.insert(cfg.layers.begin(), Conv2d{2, 3, 2, 1});  // strided first layer as well
  infer_shapes(cfg);
  auto p = init_params<float>(cfg);
  Rng rng(5);
  for (auto& l : p.layers)
    for (auto& v : l.bias.values()) v = static_cast<float>(rng.uniform(-0.1, 0.1));
  const auto x = random_batch<float>(rng, 3, 8);
  const auto out = forward(cfg, p, x).output;
  for (std::size_t n = 0; n < 3; ++n) {
    const auto want = naive_forward(cfg, p, x, n);
    for (std::size_t j = 0; j < 3; ++j) CHECK(out[n * 3 + j] == doctest::Approx(want[j]).epsilon(1e-5));
  }
}

TEST_CASE("gradients of the default model match finite differences") {
  GradcheckOptions opt;
  opt.coords_per_tensor = 12;
  const auto r = gradcheck(default_config(5, 64, 2), opt);
  INFO("max relative error " << r.max_rel_error << ", input " << r.input_max_rel_error);
  CHECK(r.passed);
  CHECK(r.max_rel_error <= 1e-4);
  CHECK(r.input_max_rel_error <= 1e-4);
  std::size_t checked = 0;
  for (const auto& t : r.tensors) checked += t.checked;
  CHECK(checked >= 8 * 8);
}

TEST_CASE("gradcheck notices a corrupted gradient") {
  GradcheckOptions opt;
  opt.coords_per_tensor = 4;
  opt.corrupt = [](ModelParams<double>& g) {
    for (auto& v : g.layers[0].weight.values()) v *= 1.01;
  };
  CHECK_FALSE(gradcheck(random_small_config(0), opt).passed);
}

TEST_CASE("adam") {
  ModelParams<double> p;
  p.layers.push_back({BasicTensor<double>({2}, {1.0, -2.0}), BasicTensor<double>({1}, {0.5})});
  auto state = make_adam(p, 0.1);
  auto zero = zeros_like(p);
  const auto before = p;
  adam_step(p, zero, state);
  CHECK(p == before);
  CHECK(state.t == 1);

  // first step moves each coordinate by lr * |g| / (|g| + eps)
  auto q = before;
  auto s2 = make_adam(q, 0.01);
  ModelParams<double> g = zeros_like(q);
  g.layers[0].weight[0] = 3.0;
  g.layers[0].weight[1] = -1e-3;
  g.layers[0].bias[0] = 0.2;
  adam_step(q, g, s2);
  CHECK(q.layers[0].weight[0] - 1.0 == doctest::Approx(-0.01 * 3.0 / (3.0 + 1e-8)).epsilon(1e-9));
  CHECK(q.layers[0].weight[1] + 2.0 == doctest::Approx(0.01 * 1e-3 / (1e-3 + 1e-8)).epsilon(1e-9));
  CHECK(q.layers[0].bias[0] - 0.5 == doctest::Approx(-0.01).epsilon(1e-6));

  // w^2 from w = 1, three steps
  ModelParams<double> w;
  w.layers.push_back({BasicTensor<double>({1}, 1.0), BasicTensor<double>({1}, 0.0)});
  auto sw = make_adam(w, 0.1);
  oracle::ScalarAdam ref{0.1};
  double wr = 1.0;
  for (int i = 0; i < 3; ++i) {
    ModelParams<double> gw = zeros_like(w);
    gw.layers[0].weight[0] = 2 * w.layers[0].weight[0];
    adam_step(w, gw, sw);
    wr = ref.step(wr, 2 * wr);
    CHECK(w.layers[0].weight[0] == doctest::Approx(wr).epsilon(1e-14));
  }
  CHECK(sw.t == 3);

  auto bad = zeros_like(w);
  bad.layers[0].bias[0] = std::numeric_limits<double>::quiet_NaN();
  const auto frozen = w;
  CHECK_THROWS_AS(adam_step(w, bad, sw), TrainingError);
  CHECK(w == frozen);
}

TEST_CASE("early stopping follows the injected validation losses") {
  const auto train_set = blobs(32, 1);
  const auto val_set = blobs(16, 2);
  const auto cfg = blob_config();
  const std::vector<double> seq = {1.0, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9, 0.8, 0.7};
  std::vector<ModelParams<float>> snapshots;
  TrainHooks hooks;
  hooks.val_loss_override = [&](int epoch, double) { return seq[static_cast<std::size_t>(epoch - 1)]; };
  hooks.on_epoch_end = [&](int, const ModelParams<float>& p) { snapshots.push_back(p); };
  TrainConfig tc;
  tc.batch_size = 8;
  const auto r = train(cfg, init_params<float>(cfg), train_set, val_set, tc, hooks);
  CHECK(r.log.epochs.size() == 7);
  CHECK(r.log.best_epoch == 2);
  CHECK(r.log.stopped_early);
  REQUIRE(snapshots.size() == 7);
  CHECK(r.best_params == snapshots[1]);
  CHECK_FALSE(r.best_params == snapshots[6]);
}

TEST_CASE("one epoch only") {
  TrainConfig tc;
  tc.max_epochs = 1;
  const auto cfg = blob_config();
  const auto r = train(cfg, init_params<float>(cfg), blobs(16, 1), blobs(8, 2), tc);
  CHECK(r.log.epochs.size() == 1);
  CHECK(r.log.epochs[0].epoch == 1);
}

TEST_CASE("toy blobs are learned and training is deterministic") {
  const auto cfg = blob_config();
  const auto train_set = blobs(200, 11);
  const auto val_set = blobs(100, 12);
  TrainConfig tc;
  tc.max_epochs = 10;
  tc.batch_size = 16;
  tc.learning_rate = 0.01;
  std::vector<ModelParams<float>> snapshots;
  TrainHooks hooks;
  hooks.on_epoch_end = [&](int, const ModelParams<float>& p) { snapshots.push_back(p); };
  const auto r = train(cfg, init_params<float>(cfg), train_set, val_set, tc, hooks);
  const auto ev = evaluate(cfg, r.best_params, val_set);
  CHECK(ev.accuracy >= 0.99);

  double min_val = 1e300;
  for (const auto& e : r.log.epochs) min_val = std::min(min_val, e.val_loss);
  CHECK(r.log.epochs[static_cast<std::size_t>(r.log.best_epoch - 1)].val_loss == min_val);
  CHECK(ev.loss == doctest::Approx(min_val).epsilon(1e-12));
  CHECK(r.best_params == snapshots[static_cast<std::size_t>(r.log.best_epoch - 1)]);
  CHECK(r.log.epochs[static_cast<std::size_t>(r.log.best_epoch - 1)].train_loss < r.log.epochs[0].train_loss);

  const auto again = train(cfg, init_params<float>(cfg), train_set, val_set, tc);
  CHECK(again.log.same_trajectory(r.log));
  CHECK(again.best_params == r.best_params);
}

TEST_CASE("prediction rules") {
  auto cfg = make_config(8, 4, {Flatten{}, Dense{4}, Softmax{}});
  auto p = init_params<float>(cfg);
  p.layers[1].weight.fill(0.0f);
  p.layers[1].bias.fill(0.0f);
  p.layers[1].bias[2] = 1.0f;
  segmentation::GlyphImage g(imaging::BinaryImage(8, 8, true));
  const auto pr = predict(cfg, p, g);
  CHECK(pr.class_id == 2);
  CHECK(pr.probability > 0.25);

  const std::vector<float> tie = {0.1f, 0.2f, 0.3f, 0.05f, 0.05f, 0.3f};
  CHECK(argmax(tie).class_id == 2);

  segmentation::GlyphImage wrong(imaging::BinaryImage(9, 9, true));
  CHECK_THROWS_AS(predict(cfg, p, wrong), StructuralError);
}

TEST_CASE("structural errors") {
  auto cfg = default_config(3, 16);
  CHECK_THROWS_AS(forward(cfg, init_params<float>(cfg), Tensor({1, 1, 8, 8})), StructuralError);
  auto bad = cfg;
  bad.layers.clear();
  CHECK_THROWS_AS(infer_shapes(bad), StructuralError);
  bad = cfg;
  bad.layers.back() = Relu{};
  CHECK(infer_shapes(bad).back() == Shape{3});  // softmax is optional
  bad.layers[bad.layers.size() - 2] = Dense{2};
  CHECK_THROWS_AS(infer_shapes(bad), StructuralError);
  bad = cfg;
  bad.layers.insert(bad.layers.begin(), Softmax{});
  CHECK_THROWS_AS(infer_shapes(bad), StructuralError);
  auto p = init_params<float>(cfg);
  p.layers[0].weight = Tensor({1});
  CHECK_THROWS_AS(forward(cfg, p, Tensor({1, 1, 16, 16})), StructuralError);
}

TEST_CASE("model serialization") {
  test::TempDir dir("model");
  auto cfg = default_config(3, 16, 9);
  cfg.class_names = {"A", "B", "C"};
  Model m{cfg, init_params<float>(cfg)};
  Rng rng(4);
  for (auto& l : m.params.layers)
    for (auto& v : l.bias.values()) v = static_cast<float>(rng.uniform(-1, 1));
  save_model(dir.path / "m.cnnm", m);
  const auto back = load_model(dir.path / "m.cnnm");
  CHECK(back.config == m.config);
  CHECK(back.params == m.params);

  std::vector<segmentation::GlyphImage> glyphs;
  for (int i = 0; i < 10; ++i) {
    imaging::BinaryImage b(16, 16);
    for (int k = 0; k < 60; ++k) b.set(static_cast<int>(rng.below(16)), static_cast<int>(rng.below(16)), true);
    glyphs.emplace_back(b);
  }
  const auto a = predict_batch(m.config, m.params, glyphs);
  const auto b = predict_batch(back.config, back.params, glyphs);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(a[i].class_id == b[i].class_id);
    CHECK(a[i].probability == b[i].probability);
  }

  const auto bytes = encode_model(m);
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    CHECK_THROWS_AS(decode_model(std::span(bytes).first(cut)), FormatError);
  }
  auto flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(decode_model(flipped), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK_THROWS_AS(decode_model(magic), FormatError);
  auto longer = bytes;
  longer.push_back(0);
  CHECK_THROWS_AS(decode_model(longer), FormatError);
  CHECK_THROWS_AS(load_model(dir.path / "missing.cnnm"), IoError);
}

TEST_CASE("layer json rejects unknown keys") {
  const auto j = layers_to_json(default_layers(4));
  CHECK(layers_from_json(j) == default_layers(4));
  auto bad = j;
  bad[0]["dilation"] = 2;
  CHECK_THROWS(layers_from_json(bad));
}
