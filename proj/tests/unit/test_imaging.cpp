#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <set>
#include <vector>

#include "cuneiform/error.hpp"
#include "cuneiform/imaging.hpp"
#include "cuneiform/rng.hpp"
#include "oracles.hpp"

using namespace cuneiform;
using namespace cuneiform::imaging;

TEST_CASE("grayscale uses fixed luma weights") {
  CHECK(to_grayscale(RgbImage(2, 2, std::vector<std::uint8_t>(12, 255))) == GrayImage(2, 2, 255));
  RgbImage red(3, 1, {255, 0, 0, 255, 0, 0, 255, 0, 0});
  CHECK(to_grayscale(red) == GrayImage(3, 1, 76));
  RgbImage bw(2, 1, {0, 0, 0, 255, 255, 255});
  CHECK(to_grayscale(bw).pixels()[0] == 0);
  CHECK(to_grayscale(bw).pixels()[1] == 255);

  for (int v = 0; v < 256; ++v) {
    const auto b = static_cast<std::uint8_t>(v);
    CHECK(to_grayscale(RgbImage(1, 1, {b, b, b})).at(0, 0) == b);
  }
  CHECK_THROWS_AS(to_grayscale(RgbImage{}), InputError);
}

TEST_CASE("resize keeps the aspect ratio") {
  const auto big = resize_to_width(GrayImage(3000, 1500, 9), 1000);
  CHECK(big.width() == 1000);
  CHECK(big.height() == 500);
  CHECK(std::all_of(big.pixels().begin(), big.pixels().end(), [](auto v) { return v == 9; }));

  Rng rng(3);
  GrayImage noise(1000, 400);
  for (auto& v : noise.pixels()) v = static_cast<std::uint8_t>(rng.below(256));
  CHECK(resize_to_width(noise, 1000) == noise);

  for (int i = 0; i < 50; ++i) {
    const int w = 1 + static_cast<int>(rng.below(300));
    const int h = 1 + static_cast<int>(rng.below(300));
    const int t = 1 + static_cast<int>(rng.below(300));
    const auto out = resize_to_width(GrayImage(w, h), t);
    CHECK(out.width() == t);
    CHECK(std::abs(static_cast<double>(out.height()) / t - static_cast<double>(h) / w) <= 1.0 / t + 1e-12);
  }
}

TEST_CASE("checkerboard upscale keeps the corners") {
  GrayImage board(2, 2, {0, 255, 255, 0});
  const auto out = resize_to_width(board, 4);
  REQUIRE(out.width() == 4);
  REQUIRE(out.height() == 4);
  CHECK(out.at(0, 0) == 0);
  CHECK(out.at(3, 0) == 255);
  CHECK(out.at(0, 3) == 255);
  CHECK(out.at(3, 3) == 0);
  // sample (1.5 -> 0.25): 0.75*0.75*0 + 2*0.75*0.25*255 + 0.25*0.25*0
  CHECK(out.at(1, 1) == 96);
}

TEST_CASE("otsu on hand cases") {
  GrayImage two(4, 1, {0, 0, 255, 255});
  const auto r = otsu_threshold(two, Polarity::ink_is_dark);
  CHECK(r.foreground == 2);
  CHECK(r.binary.at(0, 0));
  CHECK(r.binary.at(1, 0));
  CHECK_FALSE(r.binary.at(2, 0));
  const auto light = otsu_threshold(two, Polarity::ink_is_light);
  CHECK(light.foreground == 2);
  CHECK(light.binary.at(3, 0));

  const auto flat = otsu_threshold(GrayImage(5, 5, 128), Polarity::ink_is_dark);
  CHECK((flat.foreground == 0 || flat.foreground == 25));
  CHECK(flat.threshold == otsu_threshold(GrayImage(5, 5, 128), Polarity::ink_is_dark).threshold);
  CHECK(otsu_threshold(GrayImage(4, 4, 255), Polarity::ink_is_dark).foreground == 0);

  GrayImage ramp(16, 16);
  for (int i = 0; i < 256; ++i) ramp.pixels()[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
  const auto rr = otsu_threshold(ramp, Polarity::ink_is_dark);
  CHECK(rr.threshold == oracle::otsu(ramp));
  CHECK(rr.threshold == 127);
  CHECK(rr.foreground + rr.background == 256);
}

TEST_CASE("otsu agrees with the exhaustive oracle") {
  Rng rng(99);
  for (int i = 0; i < 300; ++i) {
    const int w = 1 + static_cast<int>(rng.below(24));
    const int h = 1 + static_cast<int>(rng.below(24));
    GrayImage img(w, h);
    // few distinct levels make ties likely
    const auto levels = 2 + rng.below(i % 2 ? 6 : 250);
    for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(rng.below(levels) * (255 / (levels - 1)));
    const auto r = otsu_threshold(img, Polarity::ink_is_dark);
    REQUIRE(r.threshold == oracle::otsu(img));
    std::size_t dark = 0;
    for (auto v : img.pixels()) dark += v <= r.threshold;
    CHECK(r.foreground == dark);
  }
}

namespace {

BinaryImage random_bits(Rng& rng, int w, int h, double p) {
  BinaryImage b(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) b.set(x, y, rng.bernoulli(p));
  return b;
}

bool subset(const BinaryImage& a, const BinaryImage& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.pixels()[i] && !b.pixels()[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("dilation examples") {
  BinaryImage dot(7, 7);
  dot.set(3, 3, true);
  const auto block = dilate(dot, {1, 1, ElementShape::rectangle}, 1);
  CHECK(block.count() == 9);
  for (int y = 2; y <= 4; ++y)
    for (int x = 2; x <= 4; ++x) CHECK(block.at(x, y));

  Rng rng(5);
  const auto any = random_bits(rng, 13, 9, 0.3);
  CHECK(dilate(any, {2, 1, ElementShape::cross}, 0) == any);

  BinaryImage pair(9, 5);
  pair.set(2, 2, true);
  pair.set(6, 2, true);
  const auto plus = dilate(pair, {1, 1, ElementShape::cross}, 1);
  std::set<std::pair<int, int>> want;
  for (auto [cx, cy] : {std::pair{2, 2}, std::pair{6, 2}})
    for (auto [dx, dy] : {std::pair{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}}) want.insert({cx + dx, cy + dy});
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 9; ++x) CHECK(plus.at(x, y) == (want.count({x, y}) == 1));
  CHECK(connected_components(plus, Connectivity::eight).size() == 2);
}

TEST_CASE("dilation is extensive and monotone") {
  Rng rng(17);
  for (int i = 0; i < 60; ++i) {
    const int w = 1 + static_cast<int>(rng.below(20));
    const int h = 1 + static_cast<int>(rng.below(20));
    const auto a = random_bits(rng, w, h, 0.15);
    auto b = a;
    for (int k = 0; k < 5; ++k) b.set(static_cast<int>(rng.below(w)), static_cast<int>(rng.below(h)), true);
    const StructuringElement se{static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3)),
                                rng.bernoulli(0.5) ? ElementShape::cross : ElementShape::rectangle};
    const int it = 1 + static_cast<int>(rng.below(2));
    const auto da = dilate(a, se, it);
    CHECK(subset(a, da));
    CHECK(subset(da, dilate(b, se, it)));
  }
}

TEST_CASE("connected components") {
  CHECK(connected_components(BinaryImage(8, 8)).empty());

  BinaryImage squares(10, 6);
  for (auto [ox, oy] : {std::pair{1, 1}, std::pair{6, 3}})
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) squares.set(ox + x, oy + y, true);
  const auto cs = connected_components(squares);
  REQUIRE(cs.size() == 2);
  CHECK(cs[0] == Component{4, Box{1, 1, 2, 2}});
  CHECK(cs[1] == Component{4, Box{6, 3, 7, 4}});

  BinaryImage diag(3, 3);
  diag.set(0, 0, true);
  diag.set(1, 1, true);
  CHECK(connected_components(diag, Connectivity::four).size() == 2);
  CHECK(connected_components(diag, Connectivity::eight).size() == 1);
}

TEST_CASE("components partition the foreground") {
  Rng rng(23);
  for (int i = 0; i < 40; ++i) {
    const auto img = random_bits(rng, 1 + static_cast<int>(rng.below(30)), 1 + static_cast<int>(rng.below(30)), 0.4);
    for (auto conn : {Connectivity::four, Connectivity::eight}) {
      const auto lc = label_components(img, conn);
      std::size_t total = 0;
      for (const auto& c : lc.components) total += c.pixel_count;
      CHECK(total == img.count());
      CHECK(lc.components.size() == oracle::count_components(img, conn == Connectivity::eight));
      for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
          const auto l = lc.labels[static_cast<std::size_t>(y * img.width() + x)];
          CHECK((l != 0) == img.at(x, y));
          if (l == 0) continue;
          const auto& b = lc.components[l - 1].bbox;
          CHECK((x >= b.x0 && x <= b.x1 && y >= b.y0 && y <= b.y1));
        }
      }
      CHECK(std::is_sorted(lc.components.begin(), lc.components.end(), [](const auto& a, const auto& b) {
        return std::tie(a.bbox.y0, a.bbox.x0, a.pixel_count) < std::tie(b.bbox.y0, b.bbox.x0, b.pixel_count);
      }));
    }
  }
}
