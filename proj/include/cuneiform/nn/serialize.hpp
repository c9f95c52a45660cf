#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "cuneiform/nn/model.hpp"

namespace cuneiform::nn {

struct Model {
  ModelConfig config;
  ModelParams<float> params;
};

// Layer list <-> JSON objects such as {"type": "conv2d", "out_channels": 16,
// "kernel": 3, "stride": 1, "padding": 1}. Unknown keys are rejected.
nlohmann::json layers_to_json(const std::vector<LayerSpec>& layers);
std::vector<LayerSpec> layers_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

// Model file: "CNNM", version (u32), config as length-prefixed compact
// JSON, tensor count, then each tensor as rank, extents and little-endian
// f32 values, closed by a CRC-32 of every preceding byte.
std::vector<std::uint8_t> encode_model(const Model& model);
Model decode_model(std::span<const std::uint8_t> bytes, const std::string& origin = "model");

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace cuneiform::nn
