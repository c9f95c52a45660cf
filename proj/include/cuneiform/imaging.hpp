#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cuneiform::imaging {

// Row-major 8-bit intensity raster.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::uint8_t fill = 0);
  GrayImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::uint8_t at(int x, int y) const { return data_[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return data_[index(x, y)]; }

  std::span<const std::uint8_t> pixels() const noexcept { return data_; }
  std::span<std::uint8_t> pixels() noexcept { return data_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Row-major foreground mask; true is ink. Stored one byte per pixel.
class BinaryImage {
 public:
  BinaryImage() = default;
  BinaryImage(int width, int height, bool fill = false);
  BinaryImage(int width, int height, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  bool at(int x, int y) const { return data_[index(x, y)] != 0; }
  void set(int x, int y, bool value) { data_[index(x, y)] = value ? 1 : 0; }

  bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::size_t count() const noexcept;

  // Each entry is 0 or 1.
  std::span<const std::uint8_t> pixels() const noexcept { return data_; }

  friend bool operator==(const BinaryImage&, const BinaryImage&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

// Interleaved 8-bit RGB raster, used for scan ingestion and annotated output.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // 3 * width * height

  RgbImage() = default;
  RgbImage(int w, int h, std::vector<std::uint8_t> rgb);

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

enum class Polarity { ink_is_dark, ink_is_light };

enum class ElementShape { rectangle, cross };

struct StructuringElement {
  int radius_x = 1;
  int radius_y = 1;
  ElementShape shape = ElementShape::rectangle;
};

enum class Connectivity { four, eight };

// Inclusive pixel rectangle.
struct Box {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0 + 1; }
  int height() const noexcept { return y1 - y0 + 1; }
  friend bool operator==(const Box&, const Box&) = default;
};

struct Component {
  std::size_t pixel_count = 0;
  Box bbox;
  friend bool operator==(const Component&, const Component&) = default;
};

struct ThresholdResult {
  BinaryImage binary;
  int threshold = 0;
  std::size_t foreground = 0;
  std::size_t background = 0;
};

GrayImage to_grayscale(const RgbImage& rgb);
RgbImage to_rgb(const GrayImage& gray);

// Bilinear, aspect preserving. Pixel centres are aligned (x + 0.5 convention)
// and samples outside the source are clamped to the border.
GrayImage resize_to_width(const GrayImage& img, int target_width);

// Otsu's method over the 256-bin histogram. The threshold maximises the
// between-class variance of {v <= t} vs {v > t}; ties go to the smallest t.
ThresholdResult otsu_threshold(const GrayImage& img, Polarity polarity);

// Applies the element `iterations` times; zero iterations is the identity.
BinaryImage dilate(const BinaryImage& bin, const StructuringElement& se, int iterations);

// Complement of dilate on the complement. Only the dataset variant recipes use it.
BinaryImage erode(const BinaryImage& bin, const StructuringElement& se, int iterations);

// Sorted by (y0, x0, pixel_count).
std::vector<Component> connected_components(const BinaryImage& bin, Connectivity connectivity = Connectivity::eight);

// Per-pixel component label (0 = background, k = index + 1 into the sorted list).
struct LabeledComponents {
  std::vector<Component> components;
  std::vector<std::uint32_t> labels;
};
LabeledComponents label_components(const BinaryImage& bin, Connectivity connectivity = Connectivity::eight);

// Tight bounding box of ink inside `region`; returns false when empty.
bool ink_bounds(const BinaryImage& bin, const Box& region, Box& out);

}  // namespace cuneiform::imaging
