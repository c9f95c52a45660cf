#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <tuple>

#include "cuneiform/dataset.hpp"
#include "cuneiform/error.hpp"
#include "cuneiform/image_io.hpp"
#include "cuneiform/rng.hpp"
#include "cuneiform/synth.hpp"
#include "test_util.hpp"

using namespace cuneiform;
using namespace cuneiform::dataset;

namespace {

std::vector<Sample> dummy_samples(std::size_t classes, int per_class, int side = 8) {
  std::vector<Sample> out;
  for (std::size_t c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i)
      out.push_back({GlyphImage(imaging::BinaryImage(side, side, (i + c) % 2 == 0)), c, i / 6, i % 6});
  return out;
}

// Largest remainder on integer percentages, computed with integers only.
std::vector<std::size_t> hamilton_oracle(std::size_t total, const std::vector<int>& percent) {
  std::vector<std::size_t> out(percent.size());
  std::vector<std::size_t> rem(percent.size());
  std::size_t given = 0;
  for (std::size_t k = 0; k < percent.size(); ++k) {
    out[k] = total * static_cast<std::size_t>(percent[k]) / 100;
    rem[k] = total * static_cast<std::size_t>(percent[k]) % 100;
    given += out[k];
  }
  while (given < total) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < rem.size(); ++k)
      if (rem[k] > rem[best]) best = k;
    ++out[best];
    rem[best] = 0;
    ++given;
  }
  return out;
}

auto key(const Sample& s) { return std::make_tuple(s.class_id, s.variant_id, s.augment_id); }

}  // namespace

TEST_CASE("hamilton allocation agrees with the integer oracle") {
  CHECK(hamilton_allocation(14100, {0.36, 0.24, 0.40}) == std::vector<std::size_t>{5076, 3384, 5640});
  CHECK(hamilton_allocation(100, {0.36, 0.24, 0.40}) == std::vector<std::size_t>{36, 24, 40});
  CHECK(hamilton_allocation(1200, {0.36, 0.24, 0.40}) == std::vector<std::size_t>{432, 288, 480});
  Rng rng(4);
  for (int i = 0; i < 500; ++i) {
    const int a = 1 + static_cast<int>(rng.below(97));
    const int b = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(98 - a)));
    const std::vector<int> pct{a, b, 100 - a - b};
    const std::size_t total = rng.below(5000);
    const auto got = hamilton_allocation(total, {a / 100.0, b / 100.0, (100 - a - b) / 100.0});
    REQUIRE(got == hamilton_oracle(total, pct));
  }
}

TEST_CASE("split sizes and stratification") {
  const auto one = split_dataset(dummy_samples(1, 100), {});
  CHECK(one.train.size() == 36);
  CHECK(one.val.size() == 24);
  CHECK(one.test.size() == 40);

  const auto samples = dummy_samples(20, 60);
  const SplitSpec spec;
  const auto s = split_dataset(samples, spec);
  CHECK(s.train.size() == 432);
  CHECK(s.val.size() == 288);
  CHECK(s.test.size() == 480);

  for (std::size_t c = 0; c < 20; ++c) {
    auto count = [&](const std::vector<Sample>& v) {
      return static_cast<double>(std::count_if(v.begin(), v.end(), [&](const Sample& x) { return x.class_id == c; }));
    };
    CHECK(std::abs(count(s.train) - 21.6) <= 1.0);
    CHECK(std::abs(count(s.val) - 14.4) <= 1.0);
    CHECK(std::abs(count(s.test) - 24.0) <= 1.0);
  }

  std::set<std::tuple<std::size_t, int, int>> seen;
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (const auto& x : *part) CHECK(seen.insert(key(x)).second);
  CHECK(seen.size() == samples.size());

  CHECK(split_dataset(samples, spec) == s);
  SplitSpec other = spec;
  other.seed = 99;
  CHECK_FALSE(split_dataset(samples, other) == s);
}

TEST_CASE("split rejects bad specs and tiny classes") {
  SplitSpec bad;
  bad.train_fraction = 0.5;
  CHECK_THROWS_AS(split_dataset(dummy_samples(2, 10), bad), ConfigError);
  CHECK_THROWS_AS(split_dataset(dummy_samples(2, 2), {}), InputError);
}

TEST_CASE("14,100-sample split") {
  const auto s = split_dataset(dummy_samples(235, 60), {});
  CHECK(s.train.size() == 5076);
  CHECK(s.val.size() == 3384);
  CHECK(s.test.size() == 5640);
}

TEST_CASE("variants and augmentation") {
  const auto masters = synth::generate_masters(2, 5);
  const auto v = generate_base_variants(masters[0], 10, 77, 32, 0.08);
  REQUIRE(v.size() == 10);
  CHECK(v == generate_base_variants(masters[0], 10, 77, 32, 0.08));
  for (const auto& g : v) {
    CHECK(g.side() == 32);
    CHECK(g.bits().count() > 0);
  }
  const auto single = generate_base_variants(masters[0], 1, 77, 32, 0.08);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == v[0]);

  const Sample base{v[3], 4, 3, 0};
  AugmentationConfig cfg;
  CHECK(augment(base, 0, cfg).empty());
  const auto aug = augment(base, 5, cfg);
  REQUIRE(aug.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(aug[static_cast<std::size_t>(i)].augment_id == i + 1);
    CHECK(aug[static_cast<std::size_t>(i)].class_id == 4);
    CHECK(aug[static_cast<std::size_t>(i)].image.side() == 32);
  }
  CHECK(aug == augment(base, 5, cfg));

  AugmentationConfig identity{0.0, 0.0, 1.0, 1.0, 0.0, 123};
  for (const auto& a : augment(base, 5, identity)) CHECK(a.image == base.image);

  AugmentationConfig wrong;
  wrong.noise_flip_prob = 0.5;
  CHECK_THROWS_AS(augment(base, 1, wrong), ConfigError);
}

TEST_CASE("catalog loading") {
  test::TempDir dir("catalog");
  const auto manifest = synth::write_catalog(dir.path, 3, 9);
  const auto classes = load_class_catalog(manifest);
  REQUIRE(classes.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(classes[i].class_id == i);

  {
    std::ofstream(dir.path / "empty.tsv") << "# nothing here\n";
  }
  CHECK_THROWS_AS(load_class_catalog(dir.path / "empty.tsv"), FormatError);
  auto rel = [&](std::size_t i) { return std::filesystem::relative(classes[i].source_path, dir.path).string(); };

  {
    std::ofstream out(dir.path / "missing.tsv");
    out << "A\t" << rel(0) << "\n";
    out << "B\tno_such_file.pgm\n";
    out << "C\t" << rel(2) << "\n";
  }
  try {
    load_class_catalog(dir.path / "missing.tsv");
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("no_such_file.pgm") != std::string::npos);
  }

  {
    std::ofstream out(dir.path / "dup.tsv");
    out << "A\t" << rel(0) << "\n";
    out << "A\t" << rel(1) << "\n";
  }
  CHECK_THROWS_AS(load_class_catalog(dir.path / "dup.tsv"), FormatError);
  CHECK_THROWS_AS(load_class_catalog(dir.path / "nope.tsv"), IoError);
}

TEST_CASE("full build arithmetic") {
  test::TempDir dir("build");
  const auto classes = load_class_catalog(synth::write_catalog(dir.path, 4, 3));
  BuildConfig cfg;
  cfg.glyph_size = 24;
  const auto samples = build_samples(classes, cfg);
  CHECK(samples.size() == 4u * 10u * 6u);
  std::set<std::tuple<std::size_t, int, int>> keys;
  for (const auto& s : samples) {
    CHECK(keys.insert(key(s)).second);
    CHECK(s.image.side() == 24);
    for (auto p : s.image.bits().pixels()) CHECK(p <= 1);
  }
  CHECK(build_samples(classes, cfg) == samples);
}

TEST_CASE("dataset round trips") {
  test::TempDir dir("roundtrip");
  Dataset ds;
  ds.class_names = {"A", "B", "C"};
  ds.glyph_side = 12;
  Rng rng(6);
  std::vector<Sample> samples;
  for (std::size_t c = 0; c < 3; ++c) {
    for (int i = 0; i < 12; ++i) {
      imaging::BinaryImage img(12, 12);
      for (int k = 0; k < 40; ++k) img.set(static_cast<int>(rng.below(12)), static_cast<int>(rng.below(12)), true);
      samples.push_back({GlyphImage(img), c, i / 2, i % 2});
    }
  }
  ds.split = split_dataset(samples, {});

  save_dataset(dir.path / "d", ds);
  CHECK(load_dataset(dir.path / "d") == ds);

  save_packed(dir.path / "p.bin", ds.split, 12);
  CHECK(load_packed(dir.path / "p.bin") == ds.split);

  auto bytes = test::read_bytes(dir.path / "p.bin");
  auto corrupt = bytes;
  corrupt[0] = 'X';
  test::write_bytes(dir.path / "bad.bin", corrupt);
  CHECK_THROWS_AS(load_packed(dir.path / "bad.bin"), FormatError);

  corrupt = bytes;
  corrupt[4] = 9;  // version
  test::write_bytes(dir.path / "bad.bin", corrupt);
  CHECK_THROWS_AS(load_packed(dir.path / "bad.bin"), FormatError);

  corrupt = bytes;
  corrupt[8] = static_cast<std::uint8_t>(corrupt[8] + 1);  // count
  test::write_bytes(dir.path / "bad.bin", corrupt);
  CHECK_THROWS_AS(load_packed(dir.path / "bad.bin"), FormatError);

  corrupt.assign(bytes.begin(), bytes.end() - 3);
  test::write_bytes(dir.path / "bad.bin", corrupt);
  CHECK_THROWS_AS(load_packed(dir.path / "bad.bin"), FormatError);

  corrupt.assign(bytes.begin(), bytes.begin() + 10);
  test::write_bytes(dir.path / "bad.bin", corrupt);
  CHECK_THROWS_AS(load_packed(dir.path / "bad.bin"), FormatError);

  CHECK_THROWS_AS(load_dataset(dir.path / "nothing"), IoError);
}
