#include "cuneiform/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cuneiform/error.hpp"

namespace cuneiform::segmentation {

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

bool same_line(const Box& a, const Box& b, double ratio) {
  const int overlap = std::min(a.y1, b.y1) - std::max(a.y0, b.y0) + 1;
  if (overlap <= 0) return false;
  return overlap >= ratio * std::min(a.height(), b.height());
}

// Groups box indices into reading-order lines.
std::vector<std::vector<std::size_t>> order_lines(const std::vector<Box>& boxes, double ratio) {
  DisjointSets sets(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      if (same_line(boxes[i], boxes[j], ratio)) sets.unite(i, j);
    }
  }
  std::vector<std::vector<std::size_t>> lines;
  std::vector<std::size_t> slot(boxes.size(), SIZE_MAX);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto root = sets.find(i);
    if (slot[root] == SIZE_MAX) {
      slot[root] = lines.size();
      lines.emplace_back();
    }
    lines[slot[root]].push_back(i);
  }
  for (auto& line : lines) {
    std::sort(line.begin(), line.end(), [&](std::size_t a, std::size_t b) {
      const auto& p = boxes[a];
      const auto& q = boxes[b];
      return std::tie(p.x0, p.y0, p.x1, p.y1, a) < std::tie(q.x0, q.y0, q.x1, q.y1, b);
    });
  }
  auto mean_y = [&](const std::vector<std::size_t>& line) {
    double s = 0;
    for (auto i : line) s += 0.5 * (boxes[i].y0 + boxes[i].y1);
    return s / static_cast<double>(line.size());
  };
  std::stable_sort(lines.begin(), lines.end(), [&](const auto& a, const auto& b) {
    const double ya = mean_y(a);
    const double yb = mean_y(b);
    if (ya != yb) return ya < yb;
    // equal means: compare the boxes left to right so input order never decides
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [&](std::size_t i, std::size_t j) {
      return std::tie(boxes[i].x0, boxes[i].y0, boxes[i].x1, boxes[i].y1) <
             std::tie(boxes[j].x0, boxes[j].y0, boxes[j].x1, boxes[j].y1);
    });
  });
  return lines;
}

template <typename InkAt>
GlyphImage extract_impl(int page_w, int page_h, InkAt ink_at, const Box& box, int glyph_size, double margin) {
  if (glyph_size < 1) throw InputError("glyph size must be positive");
  if (box.x0 < 0 || box.y0 < 0 || box.x1 >= page_w || box.y1 >= page_h || box.x0 > box.x1 || box.y0 > box.y1) {
    throw BoundsError("glyph box (" + std::to_string(box.x0) + "," + std::to_string(box.y0) + ")-(" +
                      std::to_string(box.x1) + "," + std::to_string(box.y1) + ") lies outside the " +
                      std::to_string(page_w) + "x" + std::to_string(page_h) + " page");
  }
  const int grow = static_cast<int>(std::lround(std::max(margin, 0.0) * std::max(box.width(), box.height())));
  const Box crop{std::max(0, box.x0 - grow), std::max(0, box.y0 - grow), std::min(page_w - 1, box.x1 + grow),
                 std::min(page_h - 1, box.y1 + grow)};
  const int cw = crop.width();
  const int ch = crop.height();
  const double scale = static_cast<double>(glyph_size) / std::max(cw, ch);
  const int dw = std::clamp(static_cast<int>(std::lround(cw * scale)), 1, glyph_size);
  const int dh = std::clamp(static_cast<int>(std::lround(ch * scale)), 1, glyph_size);
  const int ox = (glyph_size - dw) / 2;
  const int oy = (glyph_size - dh) / 2;

  BinaryImage out(glyph_size, glyph_size, false);
  for (int y = 0; y < dh; ++y) {
    const int sy = crop.y0 + std::min(ch - 1, static_cast<int>((y + 0.5) * ch / dh));
    for (int x = 0; x < dw; ++x) {
      const int sx = crop.x0 + std::min(cw - 1, static_cast<int>((x + 0.5) * cw / dw));
      if (ink_at(sx, sy)) out.set(ox + x, oy + y, true);
    }
  }
  return GlyphImage(std::move(out));
}

}  // namespace

GlyphImage::GlyphImage(BinaryImage bits) : bits_(std::move(bits)) {
  if (bits_.width() != bits_.height()) {
    throw StructuralError("glyph images must be square, got " + std::to_string(bits_.width()) + "x" +
                          std::to_string(bits_.height()));
  }
}

void SegmentationParams::validate() const {
  if (target_width < 1) throw ConfigError("segmentation.target_width must be >= 1");
  if (dilation_radius < 0) throw ConfigError("segmentation.dilation_radius must be >= 0");
  if (dilation_iterations < 0) throw ConfigError("segmentation.dilation_iterations must be >= 0");
  if (min_component_pixels < 1) throw ConfigError("segmentation.min_component_pixels must be >= 1");
  if (!(line_overlap_ratio > 0.0 && line_overlap_ratio <= 1.0)) {
    throw ConfigError("segmentation.line_overlap_ratio must lie in (0, 1]");
  }
  if (glyph_size < 8) throw ConfigError("segmentation.glyph_size must be >= 8");
  if (!(glyph_margin >= 0.0)) throw ConfigError("segmentation.glyph_margin must be >= 0");
}

std::vector<std::vector<Component>> group_into_lines(std::vector<Component> components, double line_overlap_ratio) {
  // canonical order first; index ties below then only split identical boxes
  std::sort(components.begin(), components.end(), [](const Component& a, const Component& b) {
    return std::tie(a.bbox.y0, a.bbox.x0, a.bbox.y1, a.bbox.x1, a.pixel_count) <
           std::tie(b.bbox.y0, b.bbox.x0, b.bbox.y1, b.bbox.x1, b.pixel_count);
  });
  std::vector<Box> boxes;
  boxes.reserve(components.size());
  for (const auto& c : components) boxes.push_back(c.bbox);
  std::vector<std::vector<Component>> lines;
  for (const auto& idx : order_lines(boxes, line_overlap_ratio)) {
    auto& line = lines.emplace_back();
    for (auto i : idx) line.push_back(components[i]);
  }
  return lines;
}

GlyphImage extract_glyph(const BinaryImage& page, const Box& box, int glyph_size, double glyph_margin) {
  return extract_impl(page.width(), page.height(), [&](int x, int y) { return page.at(x, y); }, box, glyph_size,
                      glyph_margin);
}

GlyphImage extract_glyph(const BinaryImage& page, const CharBox& box, const SegmentationParams& params) {
  return extract_glyph(page, box.bbox, params.glyph_size, params.glyph_margin);
}

GlyphImage normalize_glyph(const BinaryImage& image, int glyph_size, double glyph_margin) {
  Box ink;
  if (!imaging::ink_bounds(image, {0, 0, image.width() - 1, image.height() - 1}, ink)) {
    return GlyphImage(BinaryImage(glyph_size, glyph_size, false));
  }
  return extract_glyph(image, ink, glyph_size, glyph_margin);
}

SegmentedPage segment_page(const GrayImage& scan, const SegmentationParams& params) {
  params.validate();
  if (scan.empty()) throw InputError("segment_page: empty scan");

  SegmentedPage out;
  out.working = imaging::resize_to_width(scan, params.target_width);
  out.binary = imaging::otsu_threshold(out.working, params.polarity).binary;
  const auto merged = imaging::dilate(
      out.binary, {params.dilation_radius, params.dilation_radius, params.dilation_shape}, params.dilation_iterations);
  const auto labeled = imaging::label_components(merged, imaging::Connectivity::eight);

  // Each dilated component owns the undilated ink under it; its box and
  // size are measured on that ink.
  const int w = out.working.width();
  const std::size_t n = labeled.components.size();
  std::vector<Box> ink_box(n, Box{w, out.working.height(), -1, -1});
  std::vector<std::size_t> ink_count(n, 0);
  const auto ink = out.binary.pixels();
  for (std::size_t i = 0; i < ink.size(); ++i) {
    if (ink[i] == 0) continue;
    const auto k = labeled.labels[i] - 1;
    const int x = static_cast<int>(i % static_cast<std::size_t>(w));
    const int y = static_cast<int>(i / static_cast<std::size_t>(w));
    auto& b = ink_box[k];
    b.x0 = std::min(b.x0, x);
    b.y0 = std::min(b.y0, y);
    b.x1 = std::max(b.x1, x);
    b.y1 = std::max(b.y1, y);
    ++ink_count[k];
  }

  std::vector<std::size_t> kept;
  std::vector<Box> kept_boxes;
  for (std::size_t k = 0; k < n; ++k) {
    if (ink_count[k] < params.min_component_pixels) continue;
    kept.push_back(k);
    kept_boxes.push_back(ink_box[k]);
  }

  auto& layout = out.layout;
  layout.source_width = scan.width();
  layout.source_height = scan.height();
  layout.working_width = out.working.width();
  layout.working_height = out.working.height();
  layout.params_used = params;

  const auto lines = order_lines(kept_boxes, params.line_overlap_ratio);
  for (std::size_t li = 0; li < lines.size(); ++li) {
    for (std::size_t ci = 0; ci < lines[li].size(); ++ci) {
      const auto idx = lines[li][ci];
      const auto label = static_cast<std::uint32_t>(kept[idx] + 1);
      CharBox box{kept_boxes[idx], static_cast<int>(li), static_cast<int>(ci), ink_count[kept[idx]]};
      layout.boxes.push_back(box);
      // Only this component's ink is copied so neighbours inside the margin stay out.
      out.glyphs.push_back(extract_impl(
          w, out.working.height(),
          [&](int x, int y) {
            const auto i = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
            return ink[i] != 0 && labeled.labels[i] == label;
          },
          box.bbox, params.glyph_size, params.glyph_margin));
    }
  }
  return out;
}

}  // namespace cuneiform::segmentation
