#include "cuneiform/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <set>
#include <tuple>

#include "cuneiform/detail/le.hpp"
#include "cuneiform/detail/text.hpp"
#include "cuneiform/error.hpp"
#include "cuneiform/image_io.hpp"
#include "cuneiform/rng.hpp"

namespace cuneiform::dataset {

namespace {

using imaging::BinaryImage;
using imaging::GrayImage;

constexpr std::uint32_t kPackedVersion = 1;
constexpr std::size_t kSpeckle = 4;

struct Recipe {
  int thickness;  // -1 thin, 0 keep, +1 thicken
  double scale;   // resolution of the re-rendered master
  bool salt;      // add salt noise, then despeckle
};

constexpr std::array<Recipe, 10> kRecipes{{
    {0, 1.0, false},
    {+1, 1.0, false},
    {-1, 1.0, false},
    {0, 0.8, false},
    {+1, 0.8, false},
    {0, 0.6, false},
    {+1, 0.6, false},
    {0, 1.0, true},
    {-1, 0.8, false},
    {+1, 1.0, true},
}};

BinaryImage despeckle(const BinaryImage& bin, std::size_t min_pixels) {
  const auto labeled = imaging::label_components(bin, imaging::Connectivity::eight);
  std::vector<std::uint8_t> data(bin.size(), 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto l = labeled.labels[i];
    if (l != 0 && labeled.components[l - 1].pixel_count >= min_pixels) data[i] = 1;
  }
  return BinaryImage(bin.width(), bin.height(), std::move(data));
}

// Bilinear resample to scale * size with a sub-pixel phase offset.
GrayImage resample(const GrayImage& img, double scale, double phase_x, double phase_y) {
  const int w = std::max(8, static_cast<int>(std::lround(img.width() * scale)));
  const int h = std::max(8, static_cast<int>(std::lround(img.height() * scale)));
  GrayImage out(w, h);
  const double sx = static_cast<double>(img.width()) / w;
  const double sy = static_cast<double>(img.height()) / h;
  for (int y = 0; y < h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5 + phase_y, 0.0, img.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5 + phase_x, 0.0, img.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double tx = fx - x0;
      const double top = img.at(x0, y0) * (1 - tx) + img.at(x1, y0) * tx;
      const double bot = img.at(x0, y1) * (1 - tx) + img.at(x1, y1) * tx;
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(top * (1 - ty) + bot * ty), 0L, 255L));
    }
  }
  return out;
}

BinaryImage binarize_master(const GrayImage& master) {
  return despeckle(imaging::otsu_threshold(master, imaging::Polarity::ink_is_dark).binary, kSpeckle);
}

void put_record_key(std::vector<std::uint8_t>& out, const Sample& s, Split split) {
  detail::put_u32(out, static_cast<std::uint32_t>(s.class_id));
  detail::put_u16(out, static_cast<std::uint16_t>(s.variant_id));
  detail::put_u16(out, static_cast<std::uint16_t>(s.augment_id));
  out.push_back(static_cast<std::uint8_t>(split));
  out.insert(out.end(), 3, 0);
}

std::size_t bitmap_bytes(int side) { return (static_cast<std::size_t>(side) * static_cast<std::size_t>(side) + 7) / 8; }

template <typename Split_>
auto& bucket(Split_& ds, Split s) {
  switch (s) {
    case Split::train:
      return ds.train;
    case Split::val:
      return ds.val;
    case Split::test:
      return ds.test;
  }
  return ds.test;
}

std::string glyph_file(const Sample& s, Split split) {
  return std::string("glyphs/") + split_name(split) + "/c" + std::to_string(s.class_id) + "_v" +
         std::to_string(s.variant_id) + "_a" + std::to_string(s.augment_id) + ".pgm";
}

}  // namespace

const char* split_name(Split s) noexcept {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

void SplitSpec::validate() const {
  for (double f : {train_fraction, val_fraction, test_fraction}) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("split fractions must lie in (0, 1)");
  }
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

void AugmentationConfig::validate() const {
  if (!(rotation_max >= 0.0 && rotation_max < 180.0)) throw ConfigError("augmentation.rotation_max must lie in [0, 180)");
  if (!(translate_max >= 0.0)) throw ConfigError("augmentation.translate_max must be >= 0");
  if (!(scale_min > 0.0 && scale_min <= scale_max)) throw ConfigError("augmentation scale range must satisfy 0 < min <= max");
  if (!(noise_flip_prob >= 0.0 && noise_flip_prob < 0.5)) {
    throw ConfigError("augmentation.noise_flip_prob must lie in [0, 0.5)");
  }
}

void BuildConfig::validate() const {
  if (glyph_size < 8) throw ConfigError("dataset glyph_size must be >= 8");
  if (!(glyph_margin >= 0.0)) throw ConfigError("dataset glyph_margin must be >= 0");
  if (variants < 1) throw ConfigError("dataset.variants must be >= 1");
  if (augmentations < 0) throw ConfigError("dataset.augmentations must be >= 0");
  augmentation.validate();
}

std::vector<GlyphClass> load_class_catalog(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open class catalog '" + manifest.string() + "'");
  const auto base = manifest.parent_path();
  std::vector<GlyphClass> classes;
  std::set<std::string> seen;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = detail::strip_cr(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = detail::split(line, '\t');
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw FormatError(where + ": expected 'sign_name<TAB>image path'");
    }
    if (!seen.insert(fields[0]).second) throw FormatError(where + ": duplicate sign name '" + fields[0] + "'");
    GlyphClass c{classes.size(), fields[0], base / fields[1]};
    if (!std::filesystem::exists(c.source_path)) {
      throw IoError(where + ": missing glyph image '" + c.source_path.string() + "'");
    }
    const auto img = imaging::read_gray(c.source_path);
    if (binarize_master(img).count() == 0) throw FormatError(where + ": glyph image '" + c.source_path.string() + "' has no ink");
    classes.push_back(std::move(c));
  }
  if (classes.empty()) throw FormatError("class catalog '" + manifest.string() + "' lists no classes");
  return classes;
}

std::vector<GlyphImage> generate_base_variants(const GrayImage& master, int count, std::uint64_t seed, int glyph_size,
                                               double glyph_margin) {
  if (count < 1) throw InputError("variant count must be >= 1");
  std::vector<GlyphImage> out;
  const auto clean = binarize_master(master);
  out.push_back(segmentation::normalize_glyph(clean, glyph_size, glyph_margin));
  const std::size_t ink = clean.count();
  const imaging::StructuringElement stroke{1, 1, imaging::ElementShape::cross};

  for (int v = 1; v < count; ++v) {
    const Recipe& r = kRecipes[static_cast<std::size_t>(v) % kRecipes.size()];
    Rng rng(mix(seed, static_cast<std::uint64_t>(v)));
    BinaryImage bin = clean;
    if (r.scale != 1.0 || v >= static_cast<int>(kRecipes.size())) {
      bin = binarize_master(resample(master, r.scale, rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)));
    }
    if (r.thickness > 0) {
      bin = imaging::dilate(bin, stroke, 1);
    } else if (r.thickness < 0) {
      auto thin = imaging::erode(bin, stroke, 1);
      // Thin strokes can vanish entirely; keep the original weight then.
      if (static_cast<double>(thin.count()) >= 0.4 * static_cast<double>(bin.count()) && thin.count() > 0) bin = thin;
    }
    if (r.salt) {
      std::vector<std::uint8_t> noisy(bin.pixels().begin(), bin.pixels().end());
      for (auto& p : noisy) {
        if (rng.bernoulli(0.005)) p = 1;
      }
      bin = despeckle(BinaryImage(bin.width(), bin.height(), std::move(noisy)), kSpeckle);
    }
    if (bin.count() == 0 && ink > 0) bin = clean;
    out.push_back(segmentation::normalize_glyph(bin, glyph_size, glyph_margin));
  }
  return out;
}

std::vector<Sample> augment(const Sample& base, int n, const AugmentationConfig& config) {
  config.validate();
  std::vector<Sample> out;
  const BinaryImage& src = base.image.bits();
  const int side = base.image.side();
  const double c = side / 2.0;
  for (int a = 1; a <= n; ++a) {
    Rng rng(mix(mix(mix(config.seed, base.class_id), static_cast<std::uint64_t>(base.variant_id)),
                static_cast<std::uint64_t>(a)));
    const double theta = rng.uniform(-config.rotation_max, config.rotation_max) * std::numbers::pi / 180.0;
    const double scale = rng.uniform(config.scale_min, config.scale_max);
    const double tx = rng.uniform(-config.translate_max, config.translate_max) * side;
    const double ty = rng.uniform(-config.translate_max, config.translate_max) * side;
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);

    BinaryImage img(side, side, false);
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        // Inverse map of: scale about the centre, rotate, translate.
        const double u = x + 0.5 - c - tx;
        const double v = y + 0.5 - c - ty;
        const double sx = c + (cs * u + sn * v) / scale;
        const double sy = c + (-sn * u + cs * v) / scale;
        const int ix = static_cast<int>(std::floor(sx));
        const int iy = static_cast<int>(std::floor(sy));
        bool ink = src.contains(ix, iy) && src.at(ix, iy);
        if (config.noise_flip_prob > 0.0 && rng.bernoulli(config.noise_flip_prob)) ink = !ink;
        img.set(x, y, ink);
      }
    }
    out.push_back({GlyphImage(std::move(img)), base.class_id, base.variant_id, a});
  }
  return out;
}

std::vector<Sample> build_samples(const std::vector<GlyphClass>& classes, const BuildConfig& config) {
  config.validate();
  std::vector<Sample> samples;
  samples.reserve(classes.size() * static_cast<std::size_t>(config.variants * (1 + config.augmentations)));
  for (const auto& cls : classes) {
    const auto master = imaging::read_gray(cls.source_path);
    const auto bases = generate_base_variants(master, config.variants, mix(config.variant_seed, cls.class_id),
                                              config.glyph_size, config.glyph_margin);
    for (int v = 0; v < static_cast<int>(bases.size()); ++v) {
      Sample base{bases[static_cast<std::size_t>(v)], cls.class_id, v, 0};
      auto extra = augment(base, config.augmentations, config.augmentation);
      samples.push_back(std::move(base));
      std::move(extra.begin(), extra.end(), std::back_inserter(samples));
    }
  }
  return samples;
}

std::vector<std::size_t> hamilton_allocation(std::size_t total, const std::vector<double>& fractions) {
  std::vector<std::size_t> alloc(fractions.size());
  std::vector<double> rem(fractions.size());
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    double q = fractions[k] * static_cast<double>(total);
    // Products such as 0.36 * 100 land a hair off the integer.
    if (std::abs(q - std::round(q)) < 1e-9) q = std::round(q);
    alloc[k] = static_cast<std::size_t>(std::floor(q));
    // snapped so remainders that are equal in exact arithmetic tie here too
    rem[k] = std::round((q - std::floor(q)) * 1e9) / 1e9;
    assigned += alloc[k];
  }
  std::vector<std::size_t> order(fractions.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++alloc[order[i % order.size()]];
  return alloc;
}

DatasetSplit split_dataset(const std::vector<Sample>& samples, const SplitSpec& spec) {
  spec.validate();
  const std::vector<double> fractions{spec.train_fraction, spec.val_fraction, spec.test_fraction};

  std::map<std::size_t, std::vector<const Sample*>> by_class;
  for (const auto& s : samples) by_class[s.class_id].push_back(&s);
  for (const auto& [id, members] : by_class) {
    if (members.size() < 3) {
      throw InputError("class " + std::to_string(id) + " has fewer than 3 samples; cannot split");
    }
  }

  struct ClassAlloc {
    std::size_t class_id;
    std::array<std::size_t, 3> count;
    std::array<double, 3> quota;
  };
  std::vector<ClassAlloc> allocs;
  std::array<std::size_t, 3> global{};
  for (const auto& [id, members] : by_class) {
    const auto a = hamilton_allocation(members.size(), fractions);
    ClassAlloc ca{id, {a[0], a[1], a[2]}, {}};
    for (std::size_t k = 0; k < 3; ++k) {
      ca.quota[k] = fractions[k] * static_cast<double>(members.size());
      global[k] += a[k];
    }
    allocs.push_back(ca);
  }

  // Reconcile: move single samples from over-allocated to under-allocated
  // splits, only in classes where both moves stay within one sample of quota.
  const auto target = hamilton_allocation(samples.size(), fractions);
  for (std::size_t from = 0; from < 3; ++from) {
    for (std::size_t to = 0; to < 3; ++to) {
      if (from == to) continue;
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < allocs.size(); ++i) {
        const auto& ca = allocs[i];
        if (ca.count[from] > 0 && static_cast<double>(ca.count[from]) - ca.quota[from] > 1e-9 &&
            ca.quota[to] - static_cast<double>(ca.count[to]) > 1e-9) {
          candidates.push_back(i);
        }
      }
      std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        const double need_a = allocs[a].quota[to] - static_cast<double>(allocs[a].count[to]);
        const double need_b = allocs[b].quota[to] - static_cast<double>(allocs[b].count[to]);
        return need_a > need_b;
      });
      for (auto i : candidates) {
        if (global[from] <= target[from] || global[to] >= target[to]) break;
        --allocs[i].count[from];
        ++allocs[i].count[to];
        --global[from];
        ++global[to];
      }
    }
  }

  DatasetSplit out;
  for (const auto& ca : allocs) {
    auto members = by_class[ca.class_id];
    std::sort(members.begin(), members.end(), [](const Sample* a, const Sample* b) {
      return std::tie(a->variant_id, a->augment_id) < std::tie(b->variant_id, b->augment_id);
    });
    Rng rng(mix(spec.seed, ca.class_id));
    rng.shuffle(std::span(members));
    std::size_t i = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      auto& dst = bucket(out, static_cast<Split>(k));
      for (std::size_t n = 0; n < ca.count[k]; ++n) dst.push_back(*members[i++]);
    }
  }
  return out;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  for (auto s : {Split::train, Split::val, Split::test}) {
    std::filesystem::create_directories(dir / "glyphs" / split_name(s));
  }
  std::ofstream classes(dir / "classes.tsv");
  if (!classes) throw IoError("cannot write '" + (dir / "classes.tsv").string() + "'");
  classes << "class_id\tsign_name\n";
  for (std::size_t i = 0; i < ds.class_names.size(); ++i) classes << i << '\t' << ds.class_names[i] << '\n';

  std::ofstream manifest(dir / "manifest.tsv");
  if (!manifest) throw IoError("cannot write '" + (dir / "manifest.tsv").string() + "'");
  manifest << "class_id\tsign_name\tvariant_id\taugment_id\tsplit\tpath\n";
  for (auto s : {Split::train, Split::val, Split::test}) {
    auto& list = bucket(ds.split, s);
    for (const auto& sample : list) {
      if (sample.class_id >= ds.class_names.size()) throw InputError("sample class id without a class name");
      const auto rel = glyph_file(sample, s);
      imaging::write_pgm(dir / rel, sample.image.bits());
      manifest << sample.class_id << '\t' << ds.class_names[sample.class_id] << '\t' << sample.variant_id << '\t'
               << sample.augment_id << '\t' << split_name(s) << '\t' << rel << '\n';
    }
  }
  if (!manifest || !classes) throw IoError("failed writing dataset to '" + dir.string() + "'");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  std::ifstream classes(dir / "classes.tsv");
  std::ifstream manifest(dir / "manifest.tsv");
  if (!classes || !manifest) throw IoError("'" + dir.string() + "' is not a dataset directory");

  std::string raw;
  int line_no = 0;
  while (std::getline(classes, raw)) {
    ++line_no;
    const auto line = detail::strip_cr(raw);
    if (line_no == 1 || line.empty()) continue;
    const auto f = detail::split(line, '\t');
    const auto id = f.size() == 2 ? detail::parse_number<std::size_t>(f[0]) : std::nullopt;
    if (!id || *id != ds.class_names.size()) {
      throw FormatError((dir / "classes.tsv").string() + ":" + std::to_string(line_no) + ": malformed class record");
    }
    ds.class_names.push_back(f[1]);
  }

  line_no = 0;
  while (std::getline(manifest, raw)) {
    ++line_no;
    const auto line = detail::strip_cr(raw);
    if (line_no == 1 || line.empty()) continue;
    const std::string where = (dir / "manifest.tsv").string() + ":" + std::to_string(line_no);
    const auto f = detail::split(line, '\t');
    if (f.size() != 6) throw FormatError(where + ": expected 6 fields");
    const auto cls = detail::parse_number<std::size_t>(f[0]);
    const auto var = detail::parse_number<int>(f[2]);
    const auto aug = detail::parse_number<int>(f[3]);
    if (!cls || !var || !aug || *cls >= ds.class_names.size() || ds.class_names[*cls] != f[1]) {
      throw FormatError(where + ": malformed sample record");
    }
    Split split;
    if (f[4] == "train") {
      split = Split::train;
    } else if (f[4] == "val") {
      split = Split::val;
    } else if (f[4] == "test") {
      split = Split::test;
    } else {
      throw FormatError(where + ": unknown split '" + f[4] + "'");
    }
    const auto gray = imaging::read_gray(dir / f[5]);
    if (gray.width() != gray.height()) throw FormatError(where + ": glyph image is not square");
    if (ds.glyph_side == 0) ds.glyph_side = gray.width();
    if (gray.width() != ds.glyph_side) throw FormatError(where + ": glyph side differs from the rest of the dataset");
    std::vector<std::uint8_t> bits(gray.size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = gray.pixels()[i] < 128 ? 1 : 0;
    bucket(ds.split, split).push_back(
        {GlyphImage(BinaryImage(gray.width(), gray.height(), std::move(bits))), *cls, *var, *aug});
  }
  return ds;
}

void save_packed(const std::filesystem::path& file, const DatasetSplit& split, int glyph_side) {
  std::vector<std::uint8_t> out{'C', 'U', 'N', 'E'};
  detail::put_u32(out, kPackedVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(split.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(glyph_side));
  const auto nbytes = bitmap_bytes(glyph_side);
  for (auto s : {Split::train, Split::val, Split::test}) {
    for (const auto& sample : bucket(split, s)) {
      if (sample.image.side() != glyph_side) throw InputError("sample glyph side differs from the packed side");
      put_record_key(out, sample, s);
      std::vector<std::uint8_t> bits(nbytes, 0);
      const auto px = sample.image.bits().pixels();
      for (std::size_t i = 0; i < px.size(); ++i) {
        if (px[i]) bits[i / 8] = static_cast<std::uint8_t>(bits[i / 8] | (1u << (i % 8)));
      }
      out.insert(out.end(), bits.begin(), bits.end());
    }
  }
  std::ofstream f(file, std::ios::binary);
  if (!f) throw IoError("cannot write '" + file.string() + "'");
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing '" + file.string() + "'");
}

DatasetSplit load_packed(const std::filesystem::path& file) {
  std::ifstream f(file, std::ios::binary);
  if (!f) throw IoError("cannot open '" + file.string() + "'");
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  detail::Reader r(bytes, "packed dataset '" + file.string() + "'");
  const auto magic = r.take(4);
  if (!std::equal(magic.begin(), magic.end(), "CUNE")) throw FormatError("'" + file.string() + "' is not a packed dataset");
  const auto version = r.u32();
  if (version != kPackedVersion) {
    throw FormatError("'" + file.string() + "' has unsupported format version " + std::to_string(version));
  }
  const auto count = r.u32();
  const auto side = r.u32();
  if (side == 0 || side > 4096) throw FormatError("'" + file.string() + "' has an invalid glyph side");
  const auto nbytes = bitmap_bytes(static_cast<int>(side));
  const std::size_t record = 12 + nbytes;
  if (r.remaining() != static_cast<std::size_t>(count) * record) {
    throw FormatError("'" + file.string() + "' holds " + std::to_string(r.remaining() / record) +
                      " records but its header declares " + std::to_string(count));
  }
  DatasetSplit out;
  for (std::uint32_t n = 0; n < count; ++n) {
    Sample s;
    s.class_id = r.u32();
    s.variant_id = r.u16();
    s.augment_id = r.u16();
    const auto split = r.u8();
    r.take(3);
    if (split > 2) throw FormatError("'" + file.string() + "' record " + std::to_string(n) + " has an invalid split");
    const auto bits = r.take(nbytes);
    std::vector<std::uint8_t> px(static_cast<std::size_t>(side) * side);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = (bits[i / 8] >> (i % 8)) & 1u;
    s.image = GlyphImage(BinaryImage(static_cast<int>(side), static_cast<int>(side), std::move(px)));
    bucket(out, static_cast<Split>(split)).push_back(std::move(s));
  }
  return out;
}

}  // namespace cuneiform::dataset
