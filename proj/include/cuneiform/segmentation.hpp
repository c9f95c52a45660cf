#pragma once

#include <cstddef>
#include <vector>

#include "cuneiform/imaging.hpp"

namespace cuneiform::segmentation {

using imaging::BinaryImage;
using imaging::Box;
using imaging::Component;
using imaging::GrayImage;

// Square binary raster in the classifier's input format.
class GlyphImage {
 public:
  GlyphImage() = default;
  explicit GlyphImage(BinaryImage bits);

  int side() const noexcept { return bits_.width(); }
  const BinaryImage& bits() const noexcept { return bits_; }

  friend bool operator==(const GlyphImage&, const GlyphImage&) = default;

 private:
  BinaryImage bits_;
};

struct SegmentationParams {
  int target_width = 1000;
  imaging::Polarity polarity = imaging::Polarity::ink_is_dark;
  int dilation_radius = 2;
  int dilation_iterations = 1;
  imaging::ElementShape dilation_shape = imaging::ElementShape::rectangle;
  std::size_t min_component_pixels = 20;
  double line_overlap_ratio = 0.5;
  int glyph_size = 64;
  double glyph_margin = 0.08;

  // Throws ConfigError when a field is out of range.
  void validate() const;
  friend bool operator==(const SegmentationParams&, const SegmentationParams&) = default;
};

struct CharBox {
  Box bbox;
  int line_index = 0;
  int column_index = 0;
  std::size_t pixel_count = 0;
  friend bool operator==(const CharBox&, const CharBox&) = default;
};

struct PageSegmentation {
  int source_width = 0;
  int source_height = 0;
  // Boxes are expressed in the resized working frame.
  int working_width = 0;
  int working_height = 0;
  std::vector<CharBox> boxes;  // sorted by (line_index, column_index)
  SegmentationParams params_used;
  friend bool operator==(const PageSegmentation&, const PageSegmentation&) = default;
};

struct SegmentedPage {
  PageSegmentation layout;
  std::vector<GlyphImage> glyphs;  // same order as layout.boxes
  GrayImage working;               // the resized scan
  BinaryImage binary;              // thresholded, undilated
};

// Two components share a line when their vertical extents overlap by at
// least ratio * min(height); the relation is closed transitively. Lines are
// ordered by mean box centre y, components within a line by x0.
std::vector<std::vector<Component>> group_into_lines(std::vector<Component> components, double line_overlap_ratio);

// Crops `box` (grown by margin * max(w, h) on each side, clamped to the
// page), scales it with nearest-neighbour to fit glyph_size while keeping
// aspect, and centres it on a background square.
GlyphImage extract_glyph(const BinaryImage& page, const Box& box, int glyph_size, double glyph_margin);
GlyphImage extract_glyph(const BinaryImage& page, const CharBox& box, const SegmentationParams& params);

// Whole-image variant used when normalizing catalog masters: crops to the
// tight ink box first. An empty image yields an all-background glyph.
GlyphImage normalize_glyph(const BinaryImage& image, int glyph_size, double glyph_margin);

SegmentedPage segment_page(const GrayImage& scan, const SegmentationParams& params);

}  // namespace cuneiform::segmentation
