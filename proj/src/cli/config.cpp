#include "cuneiform/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

#include "cuneiform/nn/serialize.hpp"
#include "cuneiform/rng.hpp"

namespace cuneiform {

namespace {

using nlohmann::json;

template <typename T>
T convert(const json& v, const std::string& name) {
  auto bad = [&](const char* want) { return ConfigError("'" + name + "' must be " + want + ", got " + v.dump()); };
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw bad("true or false");
    return v.get<bool>();
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!v.is_number_unsigned()) throw bad("a non-negative integer");
    return v.get<std::uint64_t>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw bad("an integer");
    const auto x = v.get<std::int64_t>();
    if (x < std::numeric_limits<T>::min() || x > static_cast<std::int64_t>(std::numeric_limits<T>::max())) {
      throw bad("an integer in range");
    }
    return static_cast<T>(x);
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw bad("a number");
    return v.get<T>();
  } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
    if (!v.is_string()) throw bad("a string");
    return std::filesystem::path(v.get<std::string>());
  } else if constexpr (std::is_same_v<T, imaging::Polarity>) {
    if (v == "dark") return imaging::Polarity::ink_is_dark;
    if (v == "light") return imaging::Polarity::ink_is_light;
    throw bad("\"dark\" or \"light\"");
  } else if constexpr (std::is_same_v<T, imaging::ElementShape>) {
    if (v == "rectangle") return imaging::ElementShape::rectangle;
    if (v == "cross") return imaging::ElementShape::cross;
    throw bad("\"rectangle\" or \"cross\"");
  }
}

template <typename T>
json emit(const T& v) {
  if constexpr (std::is_same_v<T, std::filesystem::path>) {
    return v.string();
  } else if constexpr (std::is_same_v<T, imaging::Polarity>) {
    return v == imaging::Polarity::ink_is_dark ? "dark" : "light";
  } else if constexpr (std::is_same_v<T, imaging::ElementShape>) {
    return v == imaging::ElementShape::rectangle ? "rectangle" : "cross";
  } else {
    return v;
  }
}

struct Field {
  std::string section;
  std::string key;
  std::string help;
  std::function<void(RunConfig&, const json&)> set;
  std::function<json(const RunConfig&)> get;
};

// `acc` is a generic lambda returning a reference to the member.
template <typename Acc>
Field field(std::string section, std::string key, std::string help, Acc acc) {
  using T = std::remove_cvref_t<decltype(acc(std::declval<RunConfig&>()))>;
  const std::string name = section + "." + key;
  return {section, key, std::move(help), [acc, name](RunConfig& c, const json& v) { acc(c) = convert<T>(v, name); },
          [acc](const RunConfig& c) { return emit(acc(c)); }};
}

#define CFG(member) [](auto& c) -> auto& { return c.member; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      field("paths", "catalog", "class catalog manifest (sign_name<TAB>image)", CFG(paths.catalog)),
      field("paths", "dataset", "dataset directory", CFG(paths.dataset)),
      field("paths", "model", "model file", CFG(paths.model)),
      field("paths", "lexicon", "lexicon TSV", CFG(paths.lexicon)),
      field("paths", "scan", "page scan (PGM, PPM or PNG)", CFG(paths.scan)),
      field("paths", "truth", "ground-truth sign list for the scan", CFG(paths.truth)),
      field("paths", "out", "output directory", CFG(paths.out)),

      field("segmentation", "target_width", "working width the scan is resized to", CFG(segmentation.target_width)),
      field("segmentation", "polarity", "\"dark\" or \"light\" ink", CFG(segmentation.polarity)),
      field("segmentation", "dilation_radius", "structuring element radius", CFG(segmentation.dilation_radius)),
      field("segmentation", "dilation_iterations", "dilation passes", CFG(segmentation.dilation_iterations)),
      field("segmentation", "dilation_shape", "\"rectangle\" or \"cross\"", CFG(segmentation.dilation_shape)),
      field("segmentation", "min_component_pixels", "ink pixels below which a blob is noise",
            CFG(segmentation.min_component_pixels)),
      field("segmentation", "line_overlap_ratio", "vertical overlap / min height to share a line",
            CFG(segmentation.line_overlap_ratio)),
      field("segmentation", "glyph_size", "glyph side in pixels (also the model input)", CFG(segmentation.glyph_size)),
      field("segmentation", "glyph_margin", "crop margin as a fraction of the box", CFG(segmentation.glyph_margin)),

      field("dataset", "variants", "base variants per class", CFG(build.variants)),
      field("dataset", "augmentations", "augmented copies per variant", CFG(build.augmentations)),
      field("dataset", "variant_seed", "seed for variant recipes", CFG(build.variant_seed)),

      field("augmentation", "rotation_max", "max rotation in degrees", CFG(build.augmentation.rotation_max)),
      field("augmentation", "translate_max", "max shift as a fraction of the side", CFG(build.augmentation.translate_max)),
      field("augmentation", "scale_min", "min scale factor", CFG(build.augmentation.scale_min)),
      field("augmentation", "scale_max", "max scale factor", CFG(build.augmentation.scale_max)),
      field("augmentation", "noise_flip_prob", "per-pixel flip probability", CFG(build.augmentation.noise_flip_prob)),
      field("augmentation", "seed", "augmentation seed", CFG(build.augmentation.seed)),

      field("split", "train", "train fraction", CFG(split.train_fraction)),
      field("split", "val", "validation fraction", CFG(split.val_fraction)),
      field("split", "test", "test fraction", CFG(split.test_fraction)),
      field("split", "seed", "split shuffle seed", CFG(split.seed)),

      field("synth", "classes", "classes in a generated catalog", CFG(synth.classes)),
      field("synth", "seed", "generator seed", CFG(synth.seed)),

      field("model", "init_seed", "weight initialization seed", CFG(model_init_seed)),

      field("train", "max_epochs", "epoch limit", CFG(train.max_epochs)),
      field("train", "patience", "epochs without val-loss improvement before stopping", CFG(train.patience)),
      field("train", "batch_size", "mini-batch size", CFG(train.batch_size)),
      field("train", "learning_rate", "Adam step size", CFG(train.learning_rate)),
      field("train", "beta1", "Adam first-moment decay", CFG(train.beta1)),
      field("train", "beta2", "Adam second-moment decay", CFG(train.beta2)),
      field("train", "epsilon", "Adam epsilon", CFG(train.epsilon)),
      field("train", "shuffle_seed", "mini-batch shuffle seed", CFG(train.shuffle_seed)),
      field("train", "min_improvement", "val-loss decrease that counts as improvement", CFG(train.min_improvement)),

      field("gradcheck", "step", "finite-difference step", CFG(gradcheck.step)),
      field("gradcheck", "tolerance", "max relative error", CFG(gradcheck.tolerance)),
      field("gradcheck", "batch", "samples in the check batch", CFG(gradcheck.batch)),
      field("gradcheck", "coords_per_tensor", "coordinates sampled per tensor (0 = all)",
            CFG(gradcheck.coords_per_tensor)),
      field("gradcheck", "seed", "seed for data and coordinates", CFG(gradcheck.seed)),
      field("gradcheck", "input_side", "input side of the configured-topology check (0 = glyph_size)", CFG(gradcheck.input_side)),
      field("gradcheck", "num_classes", "classes of the default-topology check", CFG(gradcheck.num_classes)),
      field("gradcheck", "random_instances", "random small stacks also checked", CFG(gradcheck.random_instances)),
      field("gradcheck", "fault_layer", "test hook: corrupt this layer's gradient (-1 = off)",
            CFG(gradcheck.fault_layer)),
  };
  return table;
}

#undef CFG

}  // namespace

void RunConfig::override_seeds(std::uint64_t seed) {
  build.variant_seed = mix(seed, 1);
  build.augmentation.seed = mix(seed, 2);
  split.seed = mix(seed, 3);
  synth.seed = mix(seed, 4);
  model_init_seed = mix(seed, 5);
  train.shuffle_seed = mix(seed, 6);
  gradcheck.seed = mix(seed, 7);
}

nn::ModelConfig RunConfig::model_config(std::size_t num_classes, std::vector<std::string> class_names) const {
  auto c = nn::default_config(static_cast<int>(num_classes), segmentation.glyph_size, model_init_seed);
  if (layers) c.layers = *layers;
  c.class_names = std::move(class_names);
  nn::infer_shapes(c);
  return c;
}

void RunConfig::validate() const {
  segmentation.validate();
  build.validate();
  split.validate();
  train.validate();
  if (synth.classes < 1) throw ConfigError("synth.classes must be >= 1");
  if (gradcheck.step <= 0 || gradcheck.tolerance <= 0 || gradcheck.batch < 1 || gradcheck.input_side < 0 ||
      gradcheck.num_classes < 1 || gradcheck.random_instances < 0 || gradcheck.coords_per_tensor < 0) {
    throw ConfigError("gradcheck values must be positive");
  }
  if (layers && layers->empty()) throw StructuralError("model.layers is empty");
}

RunConfig parse_run_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  std::map<std::string, std::map<std::string, const Field*>> by_section;
  for (const auto& f : fields()) by_section[f.section][f.key] = &f;
  for (const auto& [section, body] : j.items()) {
    const auto sec = by_section.find(section);
    if (sec == by_section.end()) throw ConfigError("unknown config section '" + section + "'");
    if (!body.is_object()) throw ConfigError("config section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) {
      if (section == "model" && key == "layers") {
        c.layers = nn::layers_from_json(value);
        continue;
      }
      const auto f = sec->second.find(key);
      if (f == sec->second.end()) throw ConfigError("unknown config key '" + section + "." + key + "'");
      f->second->set(c, value);
    }
  }
  c.build.glyph_size = c.segmentation.glyph_size;
  c.build.glyph_margin = c.segmentation.glyph_margin;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

json to_json(const RunConfig& c) {
  json j = json::object();
  for (const auto& f : fields()) j[f.section][f.key] = f.get(c);
  if (c.layers) j["model"]["layers"] = nn::layers_to_json(*c.layers);
  return j;
}

std::string config_key_help(const std::vector<std::string>& sections) {
  const RunConfig defaults;
  auto wanted = [&](const std::string& s) {
    return sections.empty() || std::find(sections.begin(), sections.end(), s) != sections.end();
  };
  std::ostringstream os;
  os << "Config keys (JSON object of sections; unknown keys are rejected):\n";
  for (const auto& f : fields()) {
    if (!wanted(f.section)) continue;
    std::string name = f.section + "." + f.key;
    name.resize(std::max<std::size_t>(name.size() + 1, 34), ' ');
    std::string def = f.get(defaults).dump();
    def.resize(std::max<std::size_t>(def.size() + 1, 12), ' ');
    os << "  " << name << def << f.help << "\n";
  }
  if (wanted("model")) os << "  model.layers                      default     list of {\"type\": conv2d|maxpool|relu|flatten|dense|softmax, ...}\n";
  return os.str();
}

}  // namespace cuneiform
