#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cuneiform/imaging.hpp"

// Procedural wedge-glyph generator. Stands in for a scanned sign corpus:
// every class is a connected arrangement of 2-5 wedge impressions, rendered
// anti-aliased as dark ink on a light ground.
namespace cuneiform::synth {

using imaging::Box;
using imaging::GrayImage;

struct GlyphStyle {
  int canvas = 96;
  std::uint8_t paper = 235;
  std::uint8_t ink = 35;
  // Classes whose 32x32 normalized masks differ in fewer than this fraction
  // of pixels are rejected and redrawn.
  double min_distinct_fraction = 0.12;
};

// Sign names used for the first classes; the remainder are numbered.
std::string sign_name_for(std::size_t class_id);

// Deterministic in (count, seed).
std::vector<GrayImage> generate_masters(std::size_t count, std::uint64_t seed, const GlyphStyle& style = {});

// Writes <dir>/catalog.tsv plus one PGM per class and returns the manifest path.
std::filesystem::path write_catalog(const std::filesystem::path& dir, std::size_t count, std::uint64_t seed,
                                    const GlyphStyle& style = {});

struct PageLayout {
  int page_width = 1000;
  int margin = 40;
  int glyph_gap = 16;  // clean paper columns between neighbouring glyphs
  int line_gap = 40;   // vertical gap between the tallest glyphs of adjacent lines
  int jitter = 3;      // per-glyph vertical offset in [-jitter, jitter]
  std::uint64_t seed = 1;
  std::uint8_t paper = 235;
};

struct PlacedGlyph {
  int line = 0;
  int column = 0;
  std::size_t class_id = 0;
  Box ink_box;  // page coordinates, every pixel darker than the paper
};

struct StampedPage {
  GrayImage image;
  std::vector<PlacedGlyph> placed;  // reading order
};

// Each row of `lines` lists class ids, left to right.
StampedPage stamp_page(const std::vector<GrayImage>& masters, const std::vector<std::vector<std::size_t>>& lines,
                       const PageLayout& layout);

}  // namespace cuneiform::synth
