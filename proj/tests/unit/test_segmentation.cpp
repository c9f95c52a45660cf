#include <doctest.h>

#include <algorithm>
#include <map>

#include "cuneiform/error.hpp"
#include "cuneiform/rng.hpp"
#include "cuneiform/segmentation.hpp"
#include "cuneiform/synth.hpp"
#include "oracles.hpp"

using namespace cuneiform;
using namespace cuneiform::segmentation;
using imaging::Box;

namespace {

Component comp(int x0, int y0, int x1, int y1) { return {1, Box{x0, y0, x1, y1}}; }

}  // namespace

TEST_CASE("two bands of three") {
  std::vector<Component> cs = {comp(50, 40, 60, 50), comp(0, 0, 10, 10), comp(50, 0, 60, 10),
                               comp(0, 40, 10, 50),  comp(25, 2, 35, 9), comp(25, 41, 35, 52)};
  const auto lines = group_into_lines(cs, 0.5);
  REQUIRE(lines.size() == 2);
  for (const auto& line : lines) REQUIRE(line.size() == 3);
  CHECK(lines[0][0].bbox.x0 == 0);
  CHECK(lines[0][1].bbox.x0 == 25);
  CHECK(lines[0][2].bbox.x0 == 50);
  CHECK(lines[1][0].bbox.y0 == 40);

  const auto one = group_into_lines({comp(3, 3, 4, 4)}, 0.5);
  REQUIRE(one.size() == 1);
  CHECK(one[0].size() == 1);
  CHECK(group_into_lines({}, 0.5).empty());
}

TEST_CASE("line grouping matches the overlap closure oracle") {
  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Component> cs;
    const int n = 2 + static_cast<int>(rng.below(10));
    for (int i = 0; i < n; ++i) {
      const int band = static_cast<int>(rng.below(3));
      const int y0 = band * 30 + static_cast<int>(rng.below(12));
      const int x0 = static_cast<int>(rng.below(200));
      cs.push_back({static_cast<std::size_t>(i + 1),
                    Box{x0, y0, x0 + 1 + static_cast<int>(rng.below(10)), y0 + 1 + static_cast<int>(rng.below(14))}});
    }
    const double ratio = trial % 3 == 0 ? 1.0 : 0.5;
    std::vector<Box> boxes;
    for (const auto& c : cs) boxes.push_back(c.bbox);
    const auto groups = oracle::overlap_groups(boxes, ratio);

    const auto lines = group_into_lines(cs, ratio);
    std::size_t total = 0;
    std::map<std::size_t, int> line_of;  // pixel_count is a unique tag here
    for (std::size_t l = 0; l < lines.size(); ++l) {
      total += lines[l].size();
      for (const auto& c : lines[l]) line_of[c.pixel_count] = static_cast<int>(l);
      CHECK(std::is_sorted(lines[l].begin(), lines[l].end(),
                           [](const auto& a, const auto& b) { return a.bbox.x0 < b.bbox.x0; }));
    }
    REQUIRE(total == cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) {
      for (std::size_t j = 0; j < cs.size(); ++j) {
        CHECK((groups[i] == groups[j]) == (line_of[cs[i].pixel_count] == line_of[cs[j].pixel_count]));
      }
    }
    // lines ordered by mean centre y
    auto mean_y = [](const std::vector<Component>& line) {
      double s = 0;
      for (const auto& c : line) s += 0.5 * (c.bbox.y0 + c.bbox.y1);
      return s / static_cast<double>(line.size());
    };
    for (std::size_t l = 1; l < lines.size(); ++l) CHECK(mean_y(lines[l - 1]) <= mean_y(lines[l]));

    // input order must not matter
    auto shuffled = cs;
    rng.shuffle(std::span(shuffled));
    const auto again = group_into_lines(shuffled, ratio);
    REQUIRE(again.size() == lines.size());
    for (std::size_t l = 0; l < lines.size(); ++l) CHECK(again[l] == lines[l]);
  }
}

TEST_CASE("glyph extraction") {
  imaging::BinaryImage page(40, 30);
  for (int y = 5; y < 15; ++y)
    for (int x = 5; x < 15; ++x) page.set(x, y, true);
  const auto full = extract_glyph(page, Box{5, 5, 14, 14}, 64, 0.0);
  CHECK(full.side() == 64);
  CHECK(full.bits().count() == 64u * 64u);

  const auto blank = extract_glyph(page, Box{20, 20, 29, 29}, 64, 0.0);
  CHECK(blank.bits().count() == 0);

  // 5 wide, 1 tall: scale 6.4, so 32 columns by round(6.4) = 6 rows, top at (32 - 6) / 2
  imaging::BinaryImage bar(20, 10);
  for (int x = 3; x < 8; ++x) bar.set(x, 4, true);
  const auto g = extract_glyph(bar, Box{3, 4, 7, 4}, 32, 0.0);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) CHECK(g.bits().at(x, y) == (y >= 13 && y < 19));

  CHECK_THROWS_AS(extract_glyph(page, Box{30, 20, 45, 29}, 32, 0.0), BoundsError);
  CHECK_THROWS_AS(extract_glyph(page, Box{-1, 0, 3, 3}, 32, 0.0), BoundsError);
}

TEST_CASE("margin is clamped to the page") {
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const int w = 5 + static_cast<int>(rng.below(60));
    const int h = 5 + static_cast<int>(rng.below(60));
    imaging::BinaryImage page(w, h);
    for (int k = 0; k < w * h / 3; ++k) page.set(static_cast<int>(rng.below(w)), static_cast<int>(rng.below(h)), true);
    const int x0 = static_cast<int>(rng.below(w));
    const int y0 = static_cast<int>(rng.below(h));
    const Box b{x0, y0, x0 + static_cast<int>(rng.below(w - x0)), y0 + static_cast<int>(rng.below(h - y0))};
    const auto g = extract_glyph(page, b, 16, rng.uniform(0.0, 0.5));
    CHECK(g.side() == 16);
  }
}

TEST_CASE("segment a stamped page") {
  const auto masters = synth::generate_masters(6, 12);
  synth::PageLayout layout;
  layout.glyph_gap = 20;
  const auto page = synth::stamp_page(masters, {{0, 1, 2, 3, 4}, {5, 4, 3, 2, 1}, {0, 2, 4, 1, 3}}, layout);
  SegmentationParams params;
  const auto seg = segment_page(page.image, params);
  REQUIRE(seg.layout.boxes.size() == 15);
  REQUIRE(seg.glyphs.size() == 15);
  for (std::size_t i = 0; i < 15; ++i) {
    CHECK(seg.layout.boxes[i].line_index == page.placed[i].line);
    CHECK(seg.layout.boxes[i].column_index == page.placed[i].column);
    CHECK(seg.glyphs[i].side() == params.glyph_size);
  }
  CHECK(segment_page(page.image, params).layout == seg.layout);

  const auto blank = segment_page(imaging::GrayImage(600, 300, 235), params);
  CHECK(blank.layout.boxes.empty());
  CHECK(blank.glyphs.empty());
}

TEST_CASE("params validation") {
  SegmentationParams p;
  CHECK_NOTHROW(p.validate());
  p.glyph_size = 7;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.min_component_pixels = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}
