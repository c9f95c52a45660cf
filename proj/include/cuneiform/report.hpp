#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cuneiform/lexicon.hpp"
#include "cuneiform/nn/serialize.hpp"
#include "cuneiform/segmentation.hpp"

namespace cuneiform::report {

using Rgb = std::array<std::uint8_t, 3>;

inline constexpr Rgb kCorrect{0, 255, 0};
inline constexpr Rgb kWrong{255, 0, 0};

struct GlyphPrediction {
  std::size_t class_id = 0;
  std::string sign;
  double probability = 0;
  friend bool operator==(const GlyphPrediction&, const GlyphPrediction&) = default;
};

struct PageReport {
  std::string table;       // one TSV row per glyph
  imaging::RgbImage overlay;
  std::size_t green = 0;
  std::size_t red = 0;
  std::optional<double> relative_accuracy;  // empty for a blank page with empty truth
  std::string summary;
};

// Box outlines are green where predicted = truth and red otherwise, with the
// predicted sign written above each box and the truth below. The overlay is
// drawn on the scan resized to the segmentation's working frame.
PageReport render_report(const segmentation::PageSegmentation& page, const std::vector<GlyphPrediction>& predicted,
                         const std::vector<std::string>& truth, const imaging::GrayImage& scan);

// report.tsv, overlay.ppm and summary.txt
void write_report(const std::filesystem::path& dir, const PageReport& report);

// 5x7 bitmap text. Letters are drawn upper case; characters without a
// glyph show as '?'. Pixels outside the image are dropped.
void draw_text(imaging::RgbImage& img, int x, int y, std::string_view text, Rgb colour, int scale = 1);
int text_width(std::string_view text, int scale = 1);

struct PageRecognition {
  segmentation::SegmentedPage page;
  std::vector<GlyphPrediction> predictions;  // reading order
  std::vector<std::string> signs;
  lexicon::TranslationResult translation;
};

// segment -> classify each glyph -> longest-match translation.
PageRecognition recognize_page(const imaging::GrayImage& scan, const nn::Model& model, const lexicon::Lexicon& lexicon,
                               const segmentation::SegmentationParams& params);

std::string class_name(const nn::ModelConfig& config, std::size_t class_id);

// TSV: index, line, column, x0, y0, x1, y1, pixel_count (working frame).
std::string segmentation_manifest(const segmentation::PageSegmentation& page);
// TSV: index, line, column, sign, class_id, probability.
std::string predictions_table(const segmentation::PageSegmentation& page, const std::vector<GlyphPrediction>& predictions);

}  // namespace cuneiform::report
