#include "cuneiform/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "cuneiform/error.hpp"

namespace cuneiform::imaging {

namespace {

void check_dims(int width, int height, std::size_t length, std::size_t channels) {
  if (width <= 0 || height <= 0) {
    throw InputError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
  const auto expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * channels;
  if (length != expected) {
    throw InputError("image data length " + std::to_string(length) + " does not match " + std::to_string(width) +
                     "x" + std::to_string(height) + "x" + std::to_string(channels));
  }
}

std::uint8_t round_clamp(double v) {
  const double r = std::round(v);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

// out[i] = 1 iff any of in[i - r .. i + r] (clamped to the line) is set.
// `stride` walks along the line, `len` is the line length.
void line_max(const std::uint8_t* in, std::uint8_t* out, int len, std::ptrdiff_t stride, int r) {
  if (r == 0) {
    for (int i = 0; i < len; ++i) out[i * stride] = in[i * stride];
    return;
  }
  // Sliding count of set pixels inside the window.
  int count = 0;
  for (int i = 0; i <= std::min(r, len - 1); ++i) count += in[i * stride];
  for (int i = 0; i < len; ++i) {
    out[i * stride] = count > 0 ? 1 : 0;
    const int leaving = i - r;
    const int entering = i + r + 1;
    if (leaving >= 0) count -= in[leaving * stride];
    if (entering < len) count += in[entering * stride];
  }
}

std::vector<std::uint8_t> horizontal(const BinaryImage& bin, int r) {
  const int w = bin.width();
  const int h = bin.height();
  std::vector<std::uint8_t> out(bin.size());
  const auto* src = bin.pixels().data();
  for (int y = 0; y < h; ++y) {
    const auto row = static_cast<std::ptrdiff_t>(y) * w;
    line_max(src + row, out.data() + row, w, 1, r);
  }
  return out;
}

std::vector<std::uint8_t> vertical(const std::uint8_t* src, int w, int h, int r) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  for (int x = 0; x < w; ++x) line_max(src + x, out.data() + x, h, w, r);
  return out;
}

BinaryImage dilate_once(const BinaryImage& bin, const StructuringElement& se) {
  const int w = bin.width();
  const int h = bin.height();
  if (se.shape == ElementShape::rectangle) {
    auto rows = horizontal(bin, se.radius_x);
    return BinaryImage(w, h, vertical(rows.data(), w, h, se.radius_y));
  }
  auto rows = horizontal(bin, se.radius_x);
  auto cols = vertical(bin.pixels().data(), w, h, se.radius_y);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<std::uint8_t>(rows[i] | cols[i]);
  return BinaryImage(w, h, std::move(rows));
}

BinaryImage complement(const BinaryImage& bin) {
  std::vector<std::uint8_t> data(bin.pixels().begin(), bin.pixels().end());
  for (auto& v : data) v = static_cast<std::uint8_t>(v ^ 1);
  return BinaryImage(bin.width(), bin.height(), std::move(data));
}

// Exact comparison of A/Da against B/Db for non-negative operands.
int compare_fractions(unsigned __int128 a, std::uint64_t da, unsigned __int128 b, std::uint64_t db) {
  const unsigned __int128 qa = a / da;
  const unsigned __int128 qb = b / db;
  if (qa != qb) return qa < qb ? -1 : 1;
  const unsigned __int128 ra = (a % da) * db;
  const unsigned __int128 rb = (b % db) * da;
  if (ra == rb) return 0;
  return ra < rb ? -1 : 1;
}

}  // namespace

GrayImage::GrayImage(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
  check_dims(width, height, static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)), 1);
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

GrayImage::GrayImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height, data_.size(), 1);
}

BinaryImage::BinaryImage(int width, int height, bool fill) : width_(width), height_(height) {
  check_dims(width, height, static_cast<std::size_t>(std::max(width, 0)) * static_cast<std::size_t>(std::max(height, 0)), 1);
  data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill ? 1 : 0);
}

BinaryImage::BinaryImage(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height, data_.size(), 1);
  for (auto& v : data_) v = v != 0 ? 1 : 0;
}

std::size_t BinaryImage::count() const noexcept {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

RgbImage::RgbImage(int w, int h, std::vector<std::uint8_t> rgb) : width(w), height(h), data(std::move(rgb)) {
  check_dims(w, h, data.size(), 3);
}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const auto i = 3 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x));
  data[i] = r;
  data[i + 1] = g;
  data[i + 2] = b;
}

GrayImage to_grayscale(const RgbImage& rgb) {
  check_dims(rgb.width, rgb.height, rgb.data.size(), 3);
  std::vector<std::uint8_t> out(rgb.data.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double r = rgb.data[3 * i];
    const double g = rgb.data[3 * i + 1];
    const double b = rgb.data[3 * i + 2];
    out[i] = round_clamp(0.299 * r + 0.587 * g + 0.114 * b);
  }
  return GrayImage(rgb.width, rgb.height, std::move(out));
}

RgbImage to_rgb(const GrayImage& gray) {
  std::vector<std::uint8_t> out(gray.size() * 3);
  const auto px = gray.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    out[3 * i] = out[3 * i + 1] = out[3 * i + 2] = px[i];
  }
  return RgbImage(gray.width(), gray.height(), std::move(out));
}

GrayImage resize_to_width(const GrayImage& img, int target_width) {
  if (target_width < 1) throw InputError("target width must be at least 1");
  const int in_w = img.width();
  const int in_h = img.height();
  const int out_w = target_width;
  const int out_h = std::max(1, static_cast<int>(std::lround(static_cast<double>(in_h) * out_w / in_w)));
  if (out_w == in_w && out_h == in_h) return img;

  struct Tap {
    int lo;
    int hi;
    double frac;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int i = 0; i < out; ++i) {
      double s = (i + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, static_cast<double>(in - 1));
      const int lo = static_cast<int>(std::floor(s));
      const int hi = std::min(lo + 1, in - 1);
      t[static_cast<std::size_t>(i)] = {lo, hi, s - lo};
    }
    return t;
  };
  const auto xs = taps(in_w, out_w);
  const auto ys = taps(in_h, out_h);

  GrayImage out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    const Tap& ty = ys[static_cast<std::size_t>(y)];
    for (int x = 0; x < out_w; ++x) {
      const Tap& tx = xs[static_cast<std::size_t>(x)];
      const double top = img.at(tx.lo, ty.lo) * (1.0 - tx.frac) + img.at(tx.hi, ty.lo) * tx.frac;
      const double bottom = img.at(tx.lo, ty.hi) * (1.0 - tx.frac) + img.at(tx.hi, ty.hi) * tx.frac;
      out.at(x, y) = round_clamp(top * (1.0 - ty.frac) + bottom * ty.frac);
    }
  }
  return out;
}

ThresholdResult otsu_threshold(const GrayImage& img, Polarity polarity) {
  if (img.empty()) throw InputError("otsu_threshold: empty image");
  std::array<std::uint64_t, 256> hist{};
  for (auto v : img.pixels()) ++hist[v];

  const auto total = static_cast<std::uint64_t>(img.size());
  std::uint64_t sum_all = 0;
  for (int v = 0; v < 256; ++v) sum_all += hist[static_cast<std::size_t>(v)] * static_cast<std::uint64_t>(v);

  // Between-class variance for split {<= t} / {> t} is proportional to
  // d^2 / (n0 * n1) with d = n1 * S0 - n0 * S1. Evaluated exactly.
  int best_t = 0;
  unsigned __int128 best_num = 0;
  std::uint64_t best_den = 1;
  std::uint64_t n0 = 0;
  std::uint64_t s0 = 0;
  for (int t = 0; t < 256; ++t) {
    n0 += hist[static_cast<std::size_t>(t)];
    s0 += hist[static_cast<std::size_t>(t)] * static_cast<std::uint64_t>(t);
    const std::uint64_t n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const std::uint64_t s1 = sum_all - s0;
    const __int128 d = static_cast<__int128>(n1) * s0 - static_cast<__int128>(n0) * s1;
    const unsigned __int128 mag = static_cast<unsigned __int128>(d < 0 ? -d : d);
    const unsigned __int128 num = mag * mag;
    const std::uint64_t den = n0 * n1;
    if (compare_fractions(num, den, best_num, best_den) > 0) {
      best_num = num;
      best_den = den;
      best_t = t;
    }
  }

  ThresholdResult result;
  result.threshold = best_t;
  std::vector<std::uint8_t> mask(img.size());
  const auto px = img.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    const bool fg = polarity == Polarity::ink_is_dark ? px[i] <= best_t : px[i] > best_t;
    mask[i] = fg ? 1 : 0;
    result.foreground += fg ? 1 : 0;
  }
  result.background = img.size() - result.foreground;
  result.binary = BinaryImage(img.width(), img.height(), std::move(mask));
  return result;
}

BinaryImage dilate(const BinaryImage& bin, const StructuringElement& se, int iterations) {
  if (se.radius_x < 0 || se.radius_y < 0) throw InputError("structuring element radii must be non-negative");
  if (iterations < 0) throw InputError("dilation iterations must be non-negative");
  BinaryImage out = bin;
  for (int i = 0; i < iterations; ++i) out = dilate_once(out, se);
  return out;
}

BinaryImage erode(const BinaryImage& bin, const StructuringElement& se, int iterations) {
  return complement(dilate(complement(bin), se, iterations));
}

LabeledComponents label_components(const BinaryImage& bin, Connectivity connectivity) {
  const int w = bin.width();
  const int h = bin.height();
  std::vector<std::uint32_t> labels(bin.size(), 0);
  std::vector<Component> found;
  std::vector<std::size_t> first_pixel;
  std::vector<std::pair<int, int>> stack;
  const auto px = bin.pixels();

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto start = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
      if (px[start] == 0 || labels[start] != 0) continue;
      const auto label = static_cast<std::uint32_t>(found.size() + 1);
      Component c{0, {x, y, x, y}};
      labels[start] = label;
      stack.assign(1, {x, y});
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        ++c.pixel_count;
        c.bbox.x0 = std::min(c.bbox.x0, cx);
        c.bbox.y0 = std::min(c.bbox.y0, cy);
        c.bbox.x1 = std::max(c.bbox.x1, cx);
        c.bbox.y1 = std::max(c.bbox.y1, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            if (connectivity == Connectivity::four && dx != 0 && dy != 0) continue;
            const int nx = cx + dx;
            const int ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const auto ni = static_cast<std::size_t>(ny) * static_cast<std::size_t>(w) + static_cast<std::size_t>(nx);
            if (px[ni] == 0 || labels[ni] != 0) continue;
            labels[ni] = label;
            stack.emplace_back(nx, ny);
          }
        }
      }
      found.push_back(c);
      first_pixel.push_back(start);
    }
  }

  std::vector<std::size_t> order(found.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ca = found[a];
    const auto& cb = found[b];
    return std::tie(ca.bbox.y0, ca.bbox.x0, ca.pixel_count, first_pixel[a]) <
           std::tie(cb.bbox.y0, cb.bbox.x0, cb.pixel_count, first_pixel[b]);
  });

  LabeledComponents out;
  out.components.reserve(found.size());
  std::vector<std::uint32_t> remap(found.size() + 1, 0);
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    out.components.push_back(found[order[rank]]);
    remap[order[rank] + 1] = static_cast<std::uint32_t>(rank + 1);
  }
  for (auto& l : labels) l = remap[l];
  out.labels = std::move(labels);
  return out;
}

std::vector<Component> connected_components(const BinaryImage& bin, Connectivity connectivity) {
  return label_components(bin, connectivity).components;
}

bool ink_bounds(const BinaryImage& bin, const Box& region, Box& out) {
  bool any = false;
  Box b{region.x1, region.y1, region.x0, region.y0};
  for (int y = std::max(region.y0, 0); y <= std::min(region.y1, bin.height() - 1); ++y) {
    for (int x = std::max(region.x0, 0); x <= std::min(region.x1, bin.width() - 1); ++x) {
      if (!bin.at(x, y)) continue;
      any = true;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  if (any) out = b;
  return any;
}

}  // namespace cuneiform::imaging
