// Python surface: the pieces that are handy from a notebook. Arrays are
// row-major numpy uint8, shape (height, width).

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cuneiform/config.hpp"
#include "cuneiform/dataset.hpp"
#include "cuneiform/error.hpp"
#include "cuneiform/image_io.hpp"
#include "cuneiform/imaging.hpp"
#include "cuneiform/lexicon.hpp"
#include "cuneiform/metrics.hpp"
#include "cuneiform/nn/gradcheck.hpp"
#include "cuneiform/nn/serialize.hpp"
#include "cuneiform/nn/train.hpp"
#include "cuneiform/report.hpp"
#include "cuneiform/segmentation.hpp"
#include "cuneiform/synth.hpp"

namespace py = pybind11;
using namespace cuneiform;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

std::vector<std::uint8_t> pixels_of(const U8Array& a, int& w, int& h) {
  if (a.ndim() != 2) throw InputError("expected a 2-D array, got " + std::to_string(a.ndim()) + " dimensions");
  h = static_cast<int>(a.shape(0));
  w = static_cast<int>(a.shape(1));
  return {a.data(), a.data() + a.size()};
}

imaging::GrayImage gray_from(const U8Array& a) {
  int w, h;
  auto px = pixels_of(a, w, h);
  return {w, h, std::move(px)};
}

imaging::BinaryImage binary_from(const U8Array& a) {
  int w, h;
  auto px = pixels_of(a, w, h);
  for (auto& v : px) v = v ? 1 : 0;
  return {w, h, std::move(px)};
}

U8Array to_array(int w, int h, std::span<const std::uint8_t> px) {
  U8Array out({h, w});
  std::copy(px.begin(), px.end(), out.mutable_data());
  return out;
}

py::tuple box_tuple(const imaging::Box& b) { return py::make_tuple(b.x0, b.y0, b.x1, b.y1); }

py::dict report_dict(const metrics::MetricsReport& r) {
  py::list per;
  for (const auto& c : r.per_class) {
    py::dict d;
    d["class_id"] = c.class_id;
    d["support"] = c.support;
    d["precision"] = c.precision;
    d["recall"] = c.recall;
    d["f1"] = c.f1;
    d["accuracy"] = c.accuracy;
    per.append(d);
  }
  py::dict d;
  d["accuracy"] = r.accuracy;
  d["macro_precision"] = r.macro_precision;
  d["macro_recall"] = r.macro_recall;
  d["macro_f1"] = r.macro_f1;
  d["per_class"] = per;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Cuneiform glyph OCR core";

  // base first: pybind11 tries translators newest first
  static py::exception<Error> base(m, "CuneiformError");
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<StructuralError>(m, "StructuralError", base);
  py::register_exception<InputError>(m, "InputError", base);
  py::register_exception<BoundsError>(m, "BoundsError", base);
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<FormatError>(m, "FormatError", base);
  py::register_exception<TrainingError>(m, "TrainingError", base);
  py::register_exception<VerificationError>(m, "VerificationError", base);

  m.def("read_gray", [](const std::filesystem::path& p) {
    const auto img = imaging::read_gray(p);
    return to_array(img.width(), img.height(), img.pixels());
  });
  m.def("otsu_threshold", [](const U8Array& a, bool ink_is_dark) {
    return imaging::otsu_threshold(gray_from(a), ink_is_dark ? imaging::Polarity::ink_is_dark
                                                              : imaging::Polarity::ink_is_light)
        .threshold;
  }, py::arg("image"), py::arg("ink_is_dark") = true);
  m.def("connected_components", [](const U8Array& a, bool eight) {
    py::list out;
    for (const auto& c : imaging::connected_components(
             binary_from(a), eight ? imaging::Connectivity::eight : imaging::Connectivity::four)) {
      out.append(py::make_tuple(c.pixel_count, box_tuple(c.bbox)));
    }
    return out;
  }, py::arg("binary"), py::arg("eight") = true);

  m.def("segment_page", [](const U8Array& a, int dilation_radius, int glyph_size) {
    segmentation::SegmentationParams params;
    params.dilation_radius = dilation_radius;
    params.glyph_size = glyph_size;
    params.validate();
    const auto seg = segmentation::segment_page(gray_from(a), params);
    py::list boxes;
    for (const auto& b : seg.layout.boxes) boxes.append(py::make_tuple(b.line_index, b.column_index, box_tuple(b.bbox)));
    py::list glyphs;
    for (const auto& g : seg.glyphs) glyphs.append(to_array(g.side(), g.side(), g.bits().pixels()));
    return py::make_tuple(boxes, glyphs);
  }, py::arg("scan"), py::arg("dilation_radius") = 2, py::arg("glyph_size") = 64);

  m.def("hamilton_allocation", &dataset::hamilton_allocation, py::arg("total"), py::arg("fractions"));

  m.def("metrics_report", [](const std::vector<std::size_t>& pred, const std::vector<std::size_t>& labels,
                             std::size_t classes) {
    return report_dict(metrics::report(metrics::confusion(pred, labels, classes)));
  }, py::arg("predictions"), py::arg("labels"), py::arg("num_classes"));

  m.def("sign_name", &synth::sign_name_for);
  m.def("write_catalog", [](const std::filesystem::path& dir, std::size_t count, std::uint64_t seed) {
    return synth::write_catalog(dir, count, seed);
  }, py::arg("dir"), py::arg("count") = 20, py::arg("seed") = 2);
  m.def("stamp_page", [](const std::filesystem::path& catalog, const std::vector<std::vector<std::size_t>>& lines,
                         int glyph_gap, std::uint64_t seed) {
    std::vector<imaging::GrayImage> masters;
    for (const auto& k : dataset::load_class_catalog(catalog)) masters.push_back(imaging::read_gray(k.source_path));
    synth::PageLayout layout;
    layout.glyph_gap = glyph_gap;
    layout.seed = seed;
    const auto page = synth::stamp_page(masters, lines, layout);
    std::vector<std::string> truth;
    for (const auto& p : page.placed) truth.push_back(synth::sign_name_for(p.class_id));
    return py::make_tuple(to_array(page.image.width(), page.image.height(), page.image.pixels()), truth);
  }, py::arg("catalog"), py::arg("lines"), py::arg("glyph_gap") = 16, py::arg("seed") = 1);

  m.def("gradcheck_random", [](std::uint64_t seed) {
    const auto r = nn::gradcheck(nn::random_small_config(seed));
    return py::make_tuple(r.passed, std::max(r.max_rel_error, r.input_max_rel_error));
  });

  py::class_<lexicon::Lexicon>(m, "Lexicon")
      .def_static("load", [](const std::filesystem::path& p) { return lexicon::load_lexicon(p); })
      .def("__len__", &lexicon::Lexicon::size)
      .def("translate", [](const lexicon::Lexicon& lex, const std::vector<std::string>& signs) {
        const auto r = lexicon::translate_sequence(signs, lex);
        py::list words;
        for (const auto& w : r.words) words.append(py::make_tuple(w.position, w.signs, w.akkadian, w.english));
        py::list unmatched;
        for (const auto& u : r.unmatched) unmatched.append(py::make_tuple(u.position, u.sign));
        return py::make_tuple(words, unmatched);
      });
  m.def("relative_accuracy", [](const std::vector<std::string>& pred, const std::vector<std::string>& truth) {
    return lexicon::relative_accuracy(pred, truth);
  });

  py::class_<nn::Model>(m, "Model")
      .def_static("load", [](const std::filesystem::path& p) { return nn::load_model(p); })
      .def("save", [](const nn::Model& model, const std::filesystem::path& p) { nn::save_model(p, model); })
      .def_property_readonly("num_classes", [](const nn::Model& model) { return model.config.num_classes; })
      .def_property_readonly("input_side", [](const nn::Model& model) { return model.config.input_side; })
      .def_property_readonly("class_names", [](const nn::Model& model) { return model.config.class_names; })
      .def("predict", [](const nn::Model& model, const U8Array& glyph) {
        const auto p = nn::predict(model.config, model.params, segmentation::GlyphImage(binary_from(glyph)));
        return py::make_tuple(p.class_id, p.probability);
      })
      .def("recognize", [](const nn::Model& model, const U8Array& scan, const lexicon::Lexicon& lex) {
        auto params = RunConfig{}.segmentation;
        params.glyph_size = model.config.input_side;
        const auto rec = report::recognize_page(gray_from(scan), model, lex, params);
        return py::make_tuple(rec.signs, rec.translation.glosses());
      });
  m.def("random_model", [](int num_classes, int input_side, std::uint64_t seed) {
    const auto cfg = nn::default_config(num_classes, input_side, seed);
    return nn::Model{cfg, nn::init_params<float>(cfg)};
  }, py::arg("num_classes"), py::arg("input_side") = 64, py::arg("seed") = 1);
}
