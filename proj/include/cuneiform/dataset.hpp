#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cuneiform/imaging.hpp"
#include "cuneiform/segmentation.hpp"

namespace cuneiform::dataset {

using segmentation::GlyphImage;

struct GlyphClass {
  std::size_t class_id = 0;
  std::string sign_name;
  std::filesystem::path source_path;
  friend bool operator==(const GlyphClass&, const GlyphClass&) = default;
};

struct Sample {
  GlyphImage image;
  std::size_t class_id = 0;
  int variant_id = 0;  // base representation
  int augment_id = 0;  // 0 = the unaugmented base
  friend bool operator==(const Sample&, const Sample&) = default;
};

enum class Split { train, val, test };
const char* split_name(Split s) noexcept;

struct SplitSpec {
  double train_fraction = 0.36;
  double val_fraction = 0.24;
  double test_fraction = 0.40;
  std::uint64_t seed = 7;

  void validate() const;
};

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;

  std::size_t size() const noexcept { return train.size() + val.size() + test.size(); }
  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

struct AugmentationConfig {
  double rotation_max = 10.0;  // degrees
  double translate_max = 0.05; // fraction of the glyph side
  double scale_min = 0.9;
  double scale_max = 1.1;
  double noise_flip_prob = 0.01;
  std::uint64_t seed = 11;

  void validate() const;
};

struct BuildConfig {
  int glyph_size = 64;
  double glyph_margin = 0.08;
  int variants = 10;
  int augmentations = 5;
  std::uint64_t variant_seed = 3;
  AugmentationConfig augmentation;

  void validate() const;
};

// Manifest: one "sign_name<TAB>image path" record per line, '#' comments,
// paths relative to the manifest's directory. Every image is opened and
// binarized up front so errors name the offending record.
std::vector<GlyphClass> load_class_catalog(const std::filesystem::path& manifest);

// Variant 0 is the binarized, despeckled master normalized to glyph_size.
// Variants 1.. cycle through fixed recipes of stroke thickening/thinning,
// downsampled re-rendering and salt-noise cleanup. Deterministic in (master, seed).
std::vector<GlyphImage> generate_base_variants(const imaging::GrayImage& master, int count, std::uint64_t seed,
                                               int glyph_size, double glyph_margin);

// n seeded affine + flip-noise copies with augment_id 1..n.
std::vector<Sample> augment(const Sample& base, int n, const AugmentationConfig& config);

// Every class contributes variants * (1 + augmentations) samples.
std::vector<Sample> build_samples(const std::vector<GlyphClass>& classes, const BuildConfig& config);

// Stratified per class with Hamilton (largest-remainder) rounding, then a
// reconciliation pass that moves at most one sample per class so the global
// split sizes equal the Hamilton allocation of the whole dataset.
DatasetSplit split_dataset(const std::vector<Sample>& samples, const SplitSpec& spec);

// Integer allocation of `total` across fractions by largest remainder
// (ties resolved in fraction order).
std::vector<std::size_t> hamilton_allocation(std::size_t total, const std::vector<double>& fractions);

struct Dataset {
  std::vector<std::string> class_names;  // indexed by class_id
  DatasetSplit split;
  int glyph_side = 0;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Directory container: manifest.tsv, classes.tsv and glyphs/<split>/*.pgm.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

// Packed single-file container: 16-byte header ("CUNE", version, sample
// count, glyph side; little-endian u32) followed by fixed-size records.
void save_packed(const std::filesystem::path& file, const DatasetSplit& split, int glyph_side);
DatasetSplit load_packed(const std::filesystem::path& file);

}  // namespace cuneiform::dataset
