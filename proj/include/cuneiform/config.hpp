#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "cuneiform/dataset.hpp"
#include "cuneiform/nn/gradcheck.hpp"
#include "cuneiform/nn/model.hpp"
#include "cuneiform/nn/train.hpp"
#include "cuneiform/segmentation.hpp"

namespace cuneiform {

struct Paths {
  std::filesystem::path catalog;
  std::filesystem::path dataset;
  std::filesystem::path model;
  std::filesystem::path lexicon;
  std::filesystem::path scan;
  std::filesystem::path truth;
  std::filesystem::path out;
};

struct SynthConfig {
  int classes = 20;
  std::uint64_t seed = 2;
};

struct GradcheckConfig {
  double step = 1e-3;
  double tolerance = 1e-4;
  int batch = 4;
  int coords_per_tensor = 12;
  std::uint64_t seed = 1;
  int input_side = 0;      // side of the configured-topology check; 0 = segmentation.glyph_size
  int num_classes = 5;
  int random_instances = 20;
  int fault_layer = -1;    // >= 0 scales that layer's analytic gradient (test hook)
};

// Everything a command may consume. Seeds all have fixed defaults.
struct RunConfig {
  Paths paths;
  segmentation::SegmentationParams segmentation;
  dataset::BuildConfig build;  // glyph_size and glyph_margin mirror `segmentation`
  dataset::SplitSpec split;
  SynthConfig synth;
  std::uint64_t model_init_seed = 1;
  std::optional<std::vector<nn::LayerSpec>> layers;  // default topology when unset
  nn::TrainConfig train;
  GradcheckConfig gradcheck;

  // Replaces every seed with a child of `seed`.
  void override_seeds(std::uint64_t seed);
  nn::ModelConfig model_config(std::size_t num_classes, std::vector<std::string> class_names = {}) const;
  void validate() const;
};

// Unknown keys anywhere are a ConfigError.
RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

// Key reference for --help: "section.key  default  description" lines,
// limited to the given sections when any are named.
std::string config_key_help(const std::vector<std::string>& sections = {});

}  // namespace cuneiform
