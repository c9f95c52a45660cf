#include "cuneiform/report.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>

#include "cuneiform/image_io.hpp"
#include "cuneiform/nn/train.hpp"

namespace cuneiform::report {

namespace {

using imaging::RgbImage;

struct FontGlyph {
  char ch;
  std::array<std::uint8_t, 7> rows;  // bit 4 = leftmost column
};

// clang-format off
constexpr FontGlyph kFont[] = {
  {'A', {0x0E,0x11,0x11,0x1F,0x11,0x11,0x11}}, {'B', {0x1E,0x11,0x11,0x1E,0x11,0x11,0x1E}},
  {'C', {0x0E,0x11,0x10,0x10,0x10,0x11,0x0E}}, {'D', {0x1C,0x12,0x11,0x11,0x11,0x12,0x1C}},
  {'E', {0x1F,0x10,0x10,0x1E,0x10,0x10,0x1F}}, {'F', {0x1F,0x10,0x10,0x1E,0x10,0x10,0x10}},
  {'G', {0x0E,0x11,0x10,0x17,0x11,0x11,0x0F}}, {'H', {0x11,0x11,0x11,0x1F,0x11,0x11,0x11}},
  {'I', {0x0E,0x04,0x04,0x04,0x04,0x04,0x0E}}, {'J', {0x07,0x02,0x02,0x02,0x02,0x12,0x0C}},
  {'K', {0x11,0x12,0x14,0x18,0x14,0x12,0x11}}, {'L', {0x10,0x10,0x10,0x10,0x10,0x10,0x1F}},
  {'M', {0x11,0x1B,0x15,0x15,0x11,0x11,0x11}}, {'N', {0x11,0x11,0x19,0x15,0x13,0x11,0x11}},
  {'O', {0x0E,0x11,0x11,0x11,0x11,0x11,0x0E}}, {'P', {0x1E,0x11,0x11,0x1E,0x10,0x10,0x10}},
  {'Q', {0x0E,0x11,0x11,0x11,0x15,0x12,0x0D}}, {'R', {0x1E,0x11,0x11,0x1E,0x14,0x12,0x11}},
  {'S', {0x0F,0x10,0x10,0x0E,0x01,0x01,0x1E}}, {'T', {0x1F,0x04,0x04,0x04,0x04,0x04,0x04}},
  {'U', {0x11,0x11,0x11,0x11,0x11,0x11,0x0E}}, {'V', {0x11,0x11,0x11,0x11,0x11,0x0A,0x04}},
  {'W', {0x11,0x11,0x11,0x15,0x15,0x15,0x0A}}, {'X', {0x11,0x11,0x0A,0x04,0x0A,0x11,0x11}},
  {'Y', {0x11,0x11,0x11,0x0A,0x04,0x04,0x04}}, {'Z', {0x1F,0x01,0x02,0x04,0x08,0x10,0x1F}},
  {'0', {0x0E,0x11,0x13,0x15,0x19,0x11,0x0E}}, {'1', {0x04,0x0C,0x04,0x04,0x04,0x04,0x0E}},
  {'2', {0x0E,0x11,0x01,0x02,0x04,0x08,0x1F}}, {'3', {0x1F,0x02,0x04,0x02,0x01,0x11,0x0E}},
  {'4', {0x02,0x06,0x0A,0x12,0x1F,0x02,0x02}}, {'5', {0x1F,0x10,0x1E,0x01,0x01,0x11,0x0E}},
  {'6', {0x06,0x08,0x10,0x1E,0x11,0x11,0x0E}}, {'7', {0x1F,0x01,0x02,0x04,0x08,0x08,0x08}},
  {'8', {0x0E,0x11,0x11,0x0E,0x11,0x11,0x0E}}, {'9', {0x0E,0x11,0x11,0x0F,0x01,0x02,0x0C}},
  {'?', {0x0E,0x11,0x01,0x02,0x04,0x00,0x04}}, {'-', {0x00,0x00,0x00,0x1F,0x00,0x00,0x00}},
  {'.', {0x00,0x00,0x00,0x00,0x00,0x0C,0x0C}}, {'_', {0x00,0x00,0x00,0x00,0x00,0x00,0x1F}},
  {' ', {0x00,0x00,0x00,0x00,0x00,0x00,0x00}},
};
// clang-format on

const FontGlyph& glyph_for(char c) {
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (const auto& g : kFont) {
    if (g.ch == up) return g;
  }
  for (const auto& g : kFont) {
    if (g.ch == '?') return g;
  }
  return kFont[0];
}

void put(RgbImage& img, int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  img.set(x, y, c[0], c[1], c[2]);
}

void fill_rect(RgbImage& img, int x0, int y0, int x1, int y1, Rgb c) {
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) put(img, x, y, c);
  }
}

// Two-pixel outline just outside the ink box.
void outline(RgbImage& img, const imaging::Box& b, Rgb c) {
  for (int ring = 1; ring <= 2; ++ring) {
    const int x0 = b.x0 - ring, x1 = b.x1 + ring, y0 = b.y0 - ring, y1 = b.y1 + ring;
    for (int x = x0; x <= x1; ++x) {
      put(img, x, y0, c);
      put(img, x, y1, c);
    }
    for (int y = y0; y <= y1; ++y) {
      put(img, x0, y, c);
      put(img, x1, y, c);
    }
  }
}

void label(RgbImage& img, int cx, int y, const std::string& text, Rgb colour) {
  const int w = text_width(text);
  const int x = cx - w / 2;
  fill_rect(img, x - 1, y - 1, x + w, y + 7, Rgb{255, 255, 255});
  draw_text(img, x, y, text, colour);
}

std::string fmt(const char* f, double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace

int text_width(std::string_view text, int scale) {
  if (text.empty()) return 0;
  return static_cast<int>(text.size()) * 6 * scale - scale;
}

void draw_text(RgbImage& img, int x, int y, std::string_view text, Rgb colour, int scale) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto& g = glyph_for(text[i]);
    const int ox = x + static_cast<int>(i) * 6 * scale;
    for (int r = 0; r < 7; ++r) {
      for (int c = 0; c < 5; ++c) {
        if (!(g.rows[static_cast<std::size_t>(r)] & (0x10 >> c))) continue;
        for (int dy = 0; dy < scale; ++dy) {
          for (int dx = 0; dx < scale; ++dx) put(img, ox + c * scale + dx, y + r * scale + dy, colour);
        }
      }
    }
  }
}

PageReport render_report(const segmentation::PageSegmentation& page, const std::vector<GlyphPrediction>& predicted,
                         const std::vector<std::string>& truth, const imaging::GrayImage& scan) {
  const auto n = page.boxes.size();
  if (predicted.size() != n || truth.size() != n) {
    throw InputError("report alignment: " + std::to_string(n) + " boxes, " + std::to_string(predicted.size()) +
                     " predictions, " + std::to_string(truth.size()) + " truth signs");
  }
  if (scan.width() != page.source_width || scan.height() != page.source_height) {
    throw StructuralError("report scan does not match the segmented page size");
  }
  PageReport r;
  r.overlay = imaging::to_rgb(scan.width() == page.working_width ? scan
                                                                  : imaging::resize_to_width(scan, page.working_width));
  r.table = "index\tline\tcolumn\tpredicted\ttruth\tprobability\tcorrect\n";
  for (std::size_t i = 0; i < n; ++i) {
    const auto& b = page.boxes[i];
    const bool ok = predicted[i].sign == truth[i];
    (ok ? r.green : r.red) += 1;
    outline(r.overlay, b.bbox, ok ? kCorrect : kWrong);
    r.table += std::to_string(i) + '\t' + std::to_string(b.line_index) + '\t' + std::to_string(b.column_index) + '\t' +
               predicted[i].sign + '\t' + truth[i] + '\t' + fmt("%.4f", predicted[i].probability) + '\t' +
               (ok ? "1" : "0") + '\n';
  }
  // Labels go on after every outline so a neighbour's box never covers them.
  for (std::size_t i = 0; i < n; ++i) {
    const auto& bb = page.boxes[i].bbox;
    const int cx = (bb.x0 + bb.x1) / 2;
    label(r.overlay, cx, bb.y0 - 12, predicted[i].sign, Rgb{0, 0, 160});
    label(r.overlay, cx, bb.y1 + 5, truth[i], Rgb{0, 0, 0});
  }
  std::vector<std::string> signs;
  for (const auto& p : predicted) signs.push_back(p.sign);
  if (n > 0) r.relative_accuracy = lexicon::relative_accuracy(signs, truth);
  r.summary = "glyphs " + std::to_string(n) + "\ncorrect " + std::to_string(r.green) + "\nwrong " +
              std::to_string(r.red) + "\nrelative_accuracy " +
              (r.relative_accuracy ? fmt("%.4f", *r.relative_accuracy) : std::string("n/a")) + "\n";
  return r;
}

void write_report(const std::filesystem::path& dir, const PageReport& report) {
  std::filesystem::create_directories(dir);
  write_file(dir / "report.tsv", report.table);
  imaging::write_ppm(dir / "overlay.ppm", report.overlay);
  write_file(dir / "summary.txt", report.summary);
}

std::string class_name(const nn::ModelConfig& config, std::size_t class_id) {
  if (class_id < config.class_names.size()) return config.class_names[class_id];
  return "C" + std::to_string(class_id);
}

PageRecognition recognize_page(const imaging::GrayImage& scan, const nn::Model& model, const lexicon::Lexicon& lexicon,
                               const segmentation::SegmentationParams& params) {
  if (model.config.input_side != params.glyph_size) {
    throw StructuralError("model input side " + std::to_string(model.config.input_side) +
                          " does not match glyph_size " + std::to_string(params.glyph_size));
  }
  PageRecognition out;
  out.page = segmentation::segment_page(scan, params);
  const auto preds = nn::predict_batch(model.config, model.params, out.page.glyphs);
  for (const auto& p : preds) {
    out.predictions.push_back({p.class_id, class_name(model.config, p.class_id), p.probability});
    out.signs.push_back(out.predictions.back().sign);
  }
  out.translation = lexicon::translate_sequence(out.signs, lexicon);
  return out;
}

std::string segmentation_manifest(const segmentation::PageSegmentation& page) {
  std::string out = "index\tline\tcolumn\tx0\ty0\tx1\ty1\tpixel_count\n";
  for (std::size_t i = 0; i < page.boxes.size(); ++i) {
    const auto& b = page.boxes[i];
    out += std::to_string(i) + '\t' + std::to_string(b.line_index) + '\t' + std::to_string(b.column_index) + '\t' +
           std::to_string(b.bbox.x0) + '\t' + std::to_string(b.bbox.y0) + '\t' + std::to_string(b.bbox.x1) + '\t' +
           std::to_string(b.bbox.y1) + '\t' + std::to_string(b.pixel_count) + '\n';
  }
  return out;
}

std::string predictions_table(const segmentation::PageSegmentation& page, const std::vector<GlyphPrediction>& predictions) {
  if (predictions.size() != page.boxes.size()) throw InputError("predictions do not align with the page boxes");
  std::string out = "index\tline\tcolumn\tsign\tclass_id\tprobability\n";
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& b = page.boxes[i];
    out += std::to_string(i) + '\t' + std::to_string(b.line_index) + '\t' + std::to_string(b.column_index) + '\t' +
           predictions[i].sign + '\t' + std::to_string(predictions[i].class_id) + '\t' +
           fmt("%.6f", predictions[i].probability) + '\n';
  }
  return out;
}

}  // namespace cuneiform::report
