#include "cuneiform/nn/serialize.hpp"

#include <zlib.h>

#include <fstream>
#include <iterator>
#include <set>

#include "cuneiform/detail/le.hpp"

namespace cuneiform::nn {

namespace {

constexpr std::uint32_t kModelVersion = 1;

using nlohmann::json;

void require_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid value for '") + key + "': " + e.what());
  }
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

void put_tensor(std::vector<std::uint8_t>& out, const Tensor& t) {
  detail::put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape()) detail::put_u32(out, static_cast<std::uint32_t>(e));
  for (auto v : t.values()) detail::put_f32(out, v);
}

Tensor read_tensor(detail::Reader& r, const Shape& expected, const std::string& origin) {
  const auto rank = r.u32();
  if (rank != expected.size()) throw FormatError(origin + ": tensor rank does not match the stored config");
  Shape shape(rank);
  for (auto& e : shape) e = r.u32();
  if (shape != expected) {
    throw FormatError(origin + ": tensor extents " + to_string(shape) + " do not match the stored config " +
                      to_string(expected));
  }
  std::vector<float> data(element_count(shape));
  for (auto& v : data) v = r.f32();
  return Tensor(shape, std::move(data));
}

}  // namespace

json layers_to_json(const std::vector<LayerSpec>& layers) {
  json arr = json::array();
  for (const auto& layer : layers) {
    json j;
    j["type"] = layer_kind(layer);
    if (const auto* c = std::get_if<Conv2d>(&layer)) {
      j["out_channels"] = c->out_channels;
      j["kernel"] = c->kernel;
      j["stride"] = c->stride;
      j["padding"] = c->padding;
    } else if (const auto* p = std::get_if<MaxPool>(&layer)) {
      j["window"] = p->window;
      j["stride"] = p->stride;
    } else if (const auto* d = std::get_if<Dense>(&layer)) {
      j["units"] = d->units;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<LayerSpec> layers_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("model.layers must be an array");
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& l = j[i];
    const std::string where = "model.layers[" + std::to_string(i) + "]";
    if (!l.is_object() || !l.contains("type") || !l["type"].is_string()) throw ConfigError(where + " needs a string 'type'");
    const auto type = l["type"].get<std::string>();
    if (type == "conv2d") {
      require_keys(l, {"type", "out_channels", "kernel", "stride", "padding"}, where);
      layers.emplace_back(Conv2d{get_or(l, "out_channels", 1), get_or(l, "kernel", 3), get_or(l, "stride", 1),
                                 get_or(l, "padding", 0)});
    } else if (type == "maxpool") {
      require_keys(l, {"type", "window", "stride"}, where);
      const int window = get_or(l, "window", 2);
      layers.emplace_back(MaxPool{window, get_or(l, "stride", window)});
    } else if (type == "relu") {
      require_keys(l, {"type"}, where);
      layers.emplace_back(Relu{});
    } else if (type == "flatten") {
      require_keys(l, {"type"}, where);
      layers.emplace_back(Flatten{});
    } else if (type == "dense") {
      require_keys(l, {"type", "units"}, where);
      if (!l.contains("units")) throw ConfigError(where + " needs 'units'");
      layers.emplace_back(Dense{get_or(l, "units", 1)});
    } else if (type == "softmax") {
      require_keys(l, {"type"}, where);
      layers.emplace_back(Softmax{});
    } else {
      throw ConfigError(where + ": unknown layer type '" + type + "'");
    }
  }
  return layers;
}

json config_to_json(const ModelConfig& config) {
  json j;
  j["input_side"] = config.input_side;
  j["input_channels"] = config.input_channels;
  j["num_classes"] = config.num_classes;
  j["init_seed"] = config.init_seed;
  j["class_names"] = config.class_names;
  j["layers"] = layers_to_json(config.layers);
  return j;
}

ModelConfig config_from_json(const json& j) {
  require_keys(j, {"input_side", "input_channels", "num_classes", "init_seed", "class_names", "layers"}, "model config");
  ModelConfig c;
  c.input_side = get_or(j, "input_side", c.input_side);
  c.input_channels = get_or(j, "input_channels", c.input_channels);
  c.num_classes = get_or(j, "num_classes", c.num_classes);
  c.init_seed = get_or<std::uint64_t>(j, "init_seed", c.init_seed);
  c.class_names = get_or(j, "class_names", std::vector<std::string>{});
  if (!j.contains("layers")) throw ConfigError("model config has no layers");
  c.layers = layers_from_json(j["layers"]);
  return c;
}

std::vector<std::uint8_t> encode_model(const Model& model) {
  const auto shapes = parameter_shapes(model.config);
  std::vector<std::uint8_t> out{'C', 'N', 'N', 'M'};
  detail::put_u32(out, kModelVersion);
  const auto text = config_to_json(model.config).dump();
  detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  std::uint32_t tensors = 0;
  for (const auto& s : shapes) tensors += s.empty() ? 0 : 2;
  detail::put_u32(out, tensors);
  if (model.params.layers.size() != shapes.size()) throw StructuralError("model parameters do not match its config");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (shapes[i].empty()) continue;
    const auto& lp = model.params.layers[i];
    if (lp.weight.shape() != shapes[i][0] || lp.bias.shape() != shapes[i][1]) {
      throw StructuralError("layer " + std::to_string(i) + " parameters do not match the config");
    }
    put_tensor(out, lp.weight);
    put_tensor(out, lp.bias);
  }
  detail::put_u32(out, crc32_of(out));
  return out;
}

Model decode_model(std::span<const std::uint8_t> bytes, const std::string& origin) {
  if (bytes.size() < 16) throw FormatError(origin + ": file too short to be a model");
  if (!std::equal(bytes.begin(), bytes.begin() + 4, "CNNM")) throw FormatError(origin + ": not a model file (bad magic)");
  const auto payload = bytes.first(bytes.size() - 4);
  detail::Reader trailer(bytes.last(4), origin);
  if (trailer.u32() != crc32_of(payload)) throw FormatError(origin + ": checksum mismatch (truncated or corrupted)");

  detail::Reader r(payload, origin);
  r.take(4);
  const auto version = r.u32();
  if (version != kModelVersion) throw FormatError(origin + ": unsupported model version " + std::to_string(version));
  const auto text_len = r.u32();
  const auto text = r.take(text_len);
  Model model;
  try {
    model.config = config_from_json(json::parse(text.begin(), text.end()));
    const auto shapes = parameter_shapes(model.config);
    const auto tensors = r.u32();
    std::uint32_t expected = 0;
    for (const auto& s : shapes) expected += s.empty() ? 0 : 2;
    if (tensors != expected) throw FormatError(origin + ": tensor count does not match the stored config");
    for (const auto& s : shapes) {
      LayerParams<float> lp;
      if (!s.empty()) {
        lp.weight = read_tensor(r, s[0], origin);
        lp.bias = read_tensor(r, s[1], origin);
      }
      model.params.layers.push_back(std::move(lp));
    }
  } catch (const json::exception& e) {
    throw FormatError(origin + ": malformed config block: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(origin + ": invalid config block: " + e.what());
  } catch (const StructuralError& e) {
    throw FormatError(origin + ": inconsistent config block: " + e.what());
  }
  if (r.remaining() != 0) throw FormatError(origin + ": trailing bytes after the last tensor");
  return model;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  const auto bytes = encode_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing model '" + path.string() + "'");
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model '" + path.string() + "'");
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_model(bytes, "model '" + path.string() + "'");
}

}  // namespace cuneiform::nn
