#include "cuneiform/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>

#include "cuneiform/error.hpp"
#include "cuneiform/image_io.hpp"
#include "cuneiform/rng.hpp"
#include "cuneiform/segmentation.hpp"

namespace cuneiform::synth {

namespace {

struct Point {
  double x;
  double y;
};

using Polygon = std::vector<Point>;

enum class WedgeKind { horizontal, vertical, diagonal_down, diagonal_up, corner };

struct Wedge {
  WedgeKind kind;
  Point head;  // centre of the wide end
  double head_size;
  double length;
};

Point direction(WedgeKind kind) {
  constexpr double r = std::numbers::sqrt2 / 2;
  switch (kind) {
    case WedgeKind::horizontal:
    case WedgeKind::corner:
      return {1, 0};
    case WedgeKind::vertical:
      return {0, 1};
    case WedgeKind::diagonal_down:
      return {r, r};
    case WedgeKind::diagonal_up:
      return {r, -r};
  }
  return {1, 0};
}

std::vector<Polygon> outline(const Wedge& w) {
  const Point d = direction(w.kind);
  const Point n{-d.y, d.x};
  const double half = w.head_size / 2;
  std::vector<Polygon> parts;
  if (w.kind == WedgeKind::corner) {
    // Winkelhaken: an open-angled head without a tail.
    const double depth = w.head_size * 0.9;
    parts.push_back({{w.head.x - half * n.x, w.head.y - half * n.y},
                     {w.head.x + depth * d.x, w.head.y + depth * d.y},
                     {w.head.x + half * n.x, w.head.y + half * n.y}});
    return parts;
  }
  parts.push_back({{w.head.x - half * n.x, w.head.y - half * n.y},
                   {w.head.x + w.head_size * d.x, w.head.y + w.head_size * d.y},
                   {w.head.x + half * n.x, w.head.y + half * n.y}});
  const double t = 1.6;
  const Point a{w.head.x + 0.4 * w.head_size * d.x, w.head.y + 0.4 * w.head_size * d.y};
  const Point b{w.head.x + w.length * d.x, w.head.y + w.length * d.y};
  parts.push_back({{a.x - t * n.x, a.y - t * n.y},
                   {b.x - t * n.x, b.y - t * n.y},
                   {b.x + t * n.x, b.y + t * n.y},
                   {a.x + t * n.x, a.y + t * n.y}});
  return parts;
}

bool inside(const Polygon& poly, Point p) {
  // Convex polygon, either winding.
  int sign = 0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % poly.size()];
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    const int s = cross > 0 ? 1 : (cross < 0 ? -1 : 0);
    if (s == 0) continue;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return true;
}

GrayImage render(const std::vector<Wedge>& wedges, const GlyphStyle& style) {
  constexpr int sub = 4;
  std::vector<Polygon> polys;
  for (const auto& w : wedges) {
    for (auto& p : outline(w)) polys.push_back(std::move(p));
  }
  GrayImage img(style.canvas, style.canvas, style.paper);
  for (int y = 0; y < style.canvas; ++y) {
    for (int x = 0; x < style.canvas; ++x) {
      int hits = 0;
      for (int sy = 0; sy < sub; ++sy) {
        for (int sx = 0; sx < sub; ++sx) {
          const Point p{x + (sx + 0.5) / sub, y + (sy + 0.5) / sub};
          for (const auto& poly : polys) {
            if (inside(poly, p)) {
              ++hits;
              break;
            }
          }
        }
      }
      const double cover = static_cast<double>(hits) / (sub * sub);
      img.at(x, y) = static_cast<std::uint8_t>(std::lround(style.paper + cover * (style.ink - style.paper)));
    }
  }
  return img;
}

bool within(const std::vector<Wedge>& wedges, int canvas) {
  const double lo = 5;
  const double hi = canvas - 5;
  for (const auto& w : wedges) {
    for (const auto& poly : outline(w)) {
      for (const auto& p : poly) {
        if (p.x < lo || p.y < lo || p.x > hi || p.y > hi) return false;
      }
    }
  }
  return true;
}

std::vector<Wedge> draw_wedges(Rng& rng, int canvas) {
  static constexpr std::array kinds{WedgeKind::horizontal, WedgeKind::vertical, WedgeKind::diagonal_down,
                                    WedgeKind::diagonal_up, WedgeKind::corner};
  const int count = 2 + static_cast<int>(rng.below(4));
  std::vector<Wedge> wedges;
  const double c = canvas / 2.0;
  wedges.push_back({kinds[rng.below(kinds.size())], {rng.uniform(c - 28, c), rng.uniform(c - 28, c)},
                    rng.uniform(13, 19), rng.uniform(30, 52)});
  while (static_cast<int>(wedges.size()) < count) {
    // Anchor each new wedge on the body of an earlier one so the sign stays connected.
    const Wedge& base = wedges[rng.below(wedges.size())];
    const Point d = direction(base.kind);
    const double reach = base.kind == WedgeKind::corner ? base.head_size * 0.5 : base.length;
    const double t = rng.uniform(0.25, 1.0) * reach;
    const Point anchor{base.head.x + t * d.x + rng.uniform(-3, 3), base.head.y + t * d.y + rng.uniform(-3, 3)};
    wedges.push_back({kinds[rng.below(kinds.size())], anchor, rng.uniform(13, 19), rng.uniform(26, 48)});
  }
  return wedges;
}

imaging::BinaryImage ink_of(const GrayImage& img) {
  return imaging::otsu_threshold(img, imaging::Polarity::ink_is_dark).binary;
}

double disagreement(const imaging::BinaryImage& a, const imaging::BinaryImage& b) {
  std::size_t diff = 0;
  for (std::size_t i = 0; i < a.size(); ++i) diff += a.pixels()[i] != b.pixels()[i] ? 1 : 0;
  return static_cast<double>(diff) / static_cast<double>(a.size());
}

}  // namespace

std::string sign_name_for(std::size_t class_id) {
  // Real sign names first so small hand-written lexicons can use them.
  static constexpr std::array<const char*, 25> names{"SUM", "MA", "A",  "WI", "LUM", "LAM", "U",  "UB", "BI",
                                                     "IR",  "NE", "ER", "TAM", "LI", "SU",  "ID", "DI", "LA",
                                                     "DA",  "AK", "E",  "UK", "TI",  "IN", "MU"};
  if (class_id < names.size()) return names[class_id];
  std::string s = std::to_string(class_id);
  return "S" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

std::vector<GrayImage> generate_masters(std::size_t count, std::uint64_t seed, const GlyphStyle& style) {
  std::vector<GrayImage> masters;
  std::vector<imaging::BinaryImage> signatures;
  const imaging::StructuringElement merge{2, 2, imaging::ElementShape::rectangle};
  for (std::size_t id = 0; id < count; ++id) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      if (attempt > 5000) throw ConfigError("cannot draw " + std::to_string(count) + " distinct synthetic glyphs");
      Rng rng(mix(mix(seed, id), attempt));
      const auto wedges = draw_wedges(rng, style.canvas);
      if (!within(wedges, style.canvas)) continue;
      auto img = render(wedges, style);
      const auto ink = ink_of(img);
      if (imaging::connected_components(imaging::dilate(ink, merge, 1)).size() != 1) continue;
      auto sig = segmentation::normalize_glyph(ink, 32, 0.0).bits();
      const bool distinct = std::all_of(signatures.begin(), signatures.end(), [&](const auto& other) {
        return disagreement(sig, other) >= style.min_distinct_fraction;
      });
      if (!distinct) continue;
      signatures.push_back(std::move(sig));
      masters.push_back(std::move(img));
      break;
    }
  }
  return masters;
}

std::filesystem::path write_catalog(const std::filesystem::path& dir, std::size_t count, std::uint64_t seed,
                                    const GlyphStyle& style) {
  std::filesystem::create_directories(dir / "glyphs");
  const auto masters = generate_masters(count, seed, style);
  const auto manifest = dir / "catalog.tsv";
  std::ofstream out(manifest);
  if (!out) throw IoError("cannot write '" + manifest.string() + "'");
  out << "# sign_name\timage\n";
  for (std::size_t id = 0; id < masters.size(); ++id) {
    const auto name = sign_name_for(id);
    const auto rel = std::filesystem::path("glyphs") / (name + ".pgm");
    imaging::write_pgm(dir / rel, masters[id]);
    out << name << '\t' << rel.generic_string() << '\n';
  }
  if (!out) throw IoError("failed writing '" + manifest.string() + "'");
  return manifest;
}

StampedPage stamp_page(const std::vector<GrayImage>& masters, const std::vector<std::vector<std::size_t>>& lines,
                       const PageLayout& layout) {
  struct Piece {
    std::size_t class_id;
    Box ink;
  };
  // Any pixel darker than the master's ground counts, so the gap is made of
  // clean paper and is not eaten by anti-aliased fringes.
  auto ink_box = [](const GrayImage& m) {
    const auto px = m.pixels();
    const auto ground = *std::max_element(px.begin(), px.end());
    Box b{m.width(), m.height(), -1, -1};
    for (int y = 0; y < m.height(); ++y) {
      for (int x = 0; x < m.width(); ++x) {
        if (m.at(x, y) >= ground) continue;
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x);
        b.y1 = std::max(b.y1, y);
      }
    }
    if (b.x1 < 0) throw InputError("synthetic master has no ink");
    return b;
  };

  std::vector<std::vector<Piece>> rows;
  int height = layout.margin;
  std::vector<int> row_top;
  for (const auto& line : lines) {
    auto& row = rows.emplace_back();
    int width = layout.margin;
    int tallest = 0;
    for (auto id : line) {
      if (id >= masters.size()) throw InputError("stamp_page: class id " + std::to_string(id) + " has no master");
      row.push_back({id, ink_box(masters[id])});
      width += row.back().ink.width() + layout.glyph_gap;
      tallest = std::max(tallest, row.back().ink.height());
    }
    if (width - layout.glyph_gap + layout.margin > layout.page_width) {
      throw InputError("stamp_page: line does not fit in a " + std::to_string(layout.page_width) + " px page");
    }
    row_top.push_back(height + layout.jitter);
    height += tallest + 2 * layout.jitter + layout.line_gap;
  }
  height += layout.margin - layout.line_gap;

  StampedPage page{GrayImage(layout.page_width, std::max(height, 1), layout.paper), {}};
  Rng rng(layout.seed);
  for (std::size_t li = 0; li < rows.size(); ++li) {
    int x = layout.margin;
    for (std::size_t ci = 0; ci < rows[li].size(); ++ci) {
      const auto& piece = rows[li][ci];
      const auto& master = masters[piece.class_id];
      const int dy = layout.jitter > 0 ? static_cast<int>(rng.below(2 * layout.jitter + 1)) - layout.jitter : 0;
      const int ox = x - piece.ink.x0;
      const int oy = row_top[li] + dy - piece.ink.y0;
      for (int y = 0; y < master.height(); ++y) {
        for (int mx = 0; mx < master.width(); ++mx) {
          const int px = ox + mx;
          const int py = oy + y;
          if (px < 0 || py < 0 || px >= page.image.width() || py >= page.image.height()) continue;
          page.image.at(px, py) = std::min(page.image.at(px, py), master.at(mx, y));
        }
      }
      page.placed.push_back({static_cast<int>(li), static_cast<int>(ci), piece.class_id,
                             {x, oy + piece.ink.y0, x + piece.ink.width() - 1, oy + piece.ink.y1}});
      x += piece.ink.width() + layout.glyph_gap;
    }
  }
  return page;
}

}  // namespace cuneiform::synth
