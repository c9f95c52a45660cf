// Command-line front end: dataset, train, eval, segment, recognize,
// translate, gradcheck and synth.

#include <CLI11.hpp>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>

#include "cuneiform/config.hpp"
#include "cuneiform/dataset.hpp"
#include "cuneiform/image_io.hpp"
#include "cuneiform/lexicon.hpp"
#include "cuneiform/metrics.hpp"
#include "cuneiform/nn/gradcheck.hpp"
#include "cuneiform/nn/serialize.hpp"
#include "cuneiform/nn/train.hpp"
#include "cuneiform/report.hpp"
#include "cuneiform/rng.hpp"
#include "cuneiform/synth.hpp"

namespace fs = std::filesystem;
using namespace cuneiform;

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string out;
};

struct PathFlags {
  std::string catalog, dataset, model, lexicon, scan, truth;
};

RunConfig load_config(const Globals& g, const PathFlags& p) {
  RunConfig c = g.config.empty() ? parse_run_config(nlohmann::json::object()) : load_run_config(g.config);
  if (g.has_seed) c.override_seeds(g.seed);
  if (!g.out.empty()) c.paths.out = g.out;
  if (!p.catalog.empty()) c.paths.catalog = p.catalog;
  if (!p.dataset.empty()) c.paths.dataset = p.dataset;
  if (!p.model.empty()) c.paths.model = p.model;
  if (!p.lexicon.empty()) c.paths.lexicon = p.lexicon;
  if (!p.scan.empty()) c.paths.scan = p.scan;
  if (!p.truth.empty()) c.paths.truth = p.truth;
  return c;
}

const fs::path& require(const fs::path& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("no ") + what + " given (flag or paths section of the config)");
  return p;
}

fs::path out_dir(const RunConfig& c) {
  const auto& dir = require(c.paths.out, "output directory (--out)");
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void print_split(const dataset::Dataset& ds) {
  std::cout << "classes " << ds.class_names.size() << "\n"
            << "samples " << ds.split.size() << "\n"
            << "train " << ds.split.train.size() << "\n"
            << "val " << ds.split.val.size() << "\n"
            << "test " << ds.split.test.size() << "\n";
}

std::set<std::string> name_set(const std::vector<std::string>& names) { return {names.begin(), names.end()}; }

int cmd_synth(const RunConfig& c) {
  const auto dir = out_dir(c);
  const auto manifest = synth::write_catalog(dir, static_cast<std::size_t>(c.synth.classes), c.synth.seed);
  std::cout << "catalog " << manifest.string() << "\nclasses " << c.synth.classes << "\n";
  return 0;
}

int cmd_dataset_build(const RunConfig& c, const std::string& packed) {
  const auto classes = dataset::load_class_catalog(require(c.paths.catalog, "catalog"));
  dataset::Dataset ds;
  for (const auto& k : classes) ds.class_names.push_back(k.sign_name);
  ds.glyph_side = c.build.glyph_size;
  ds.split = dataset::split_dataset(dataset::build_samples(classes, c.build), c.split);
  dataset::save_dataset(out_dir(c), ds);
  if (!packed.empty()) dataset::save_packed(packed, ds.split, ds.glyph_side);
  print_split(ds);
  return 0;
}

int cmd_dataset_split(const RunConfig& c, const std::string& packed) {
  auto ds = dataset::load_dataset(require(c.paths.dataset, "dataset"));
  std::vector<dataset::Sample> pool;
  for (auto* part : {&ds.split.train, &ds.split.val, &ds.split.test}) pool.insert(pool.end(), part->begin(), part->end());
  ds.split = dataset::split_dataset(pool, c.split);
  dataset::save_dataset(out_dir(c), ds);
  if (!packed.empty()) dataset::save_packed(packed, ds.split, ds.glyph_side);
  print_split(ds);
  return 0;
}

int cmd_train(const RunConfig& c) {
  const auto ds = dataset::load_dataset(require(c.paths.dataset, "dataset"));
  if (ds.split.train.empty() || ds.split.val.empty()) throw InputError("dataset needs non-empty train and val splits");
  auto mc = c.model_config(ds.class_names.size(), ds.class_names);
  mc.input_side = ds.glyph_side;
  nn::infer_shapes(mc);
  const auto dir = out_dir(c);

  nn::TrainLog partial;
  nn::TrainHooks hooks;
  hooks.on_log = [&](const nn::EpochRecord& e) {
    partial.epochs.push_back(e);
    std::printf("epoch %d train_loss %.6f val_loss %.6f val_accuracy %.4f\n", e.epoch, e.train_loss, e.val_loss,
                e.val_accuracy);
    std::fflush(stdout);
  };
  nn::TrainResult result;
  try {
    result = nn::train(mc, nn::init_params<float>(mc), nn::to_labeled_set(ds.split.train),
                       nn::to_labeled_set(ds.split.val), c.train, hooks);
  } catch (const TrainingError&) {
    write_text(dir / "train_log.csv", metrics::train_log_csv(partial));
    throw;
  }
  const fs::path model_path = c.paths.model.empty() ? dir / "model.cnnm" : c.paths.model;
  nn::save_model(model_path, {mc, result.best_params});
  write_text(dir / "train_log.csv", metrics::train_log_csv(result.log));
  const auto& best = result.log.epochs.at(static_cast<std::size_t>(result.log.best_epoch - 1));
  std::printf("model %s\nepochs %zu\nbest_epoch %d\nbest_val_loss %.6f\n", model_path.string().c_str(),
              result.log.epochs.size(), result.log.best_epoch, best.val_loss);
  return 0;
}

int cmd_eval(const RunConfig& c, const std::string& split, std::string name) {
  const auto model = nn::load_model(require(c.paths.model, "model"));
  const auto ds = dataset::load_dataset(require(c.paths.dataset, "dataset"));
  const std::vector<dataset::Sample>* part = nullptr;
  if (split == "train") part = &ds.split.train;
  if (split == "val") part = &ds.split.val;
  if (split == "test") part = &ds.split.test;
  if (!part) throw ConfigError("--split must be train, val or test");
  if (part->empty()) throw InputError("the " + split + " split is empty");
  if (ds.class_names.size() != static_cast<std::size_t>(model.config.num_classes)) {
    throw StructuralError("dataset has " + std::to_string(ds.class_names.size()) + " classes, model has " +
                          std::to_string(model.config.num_classes));
  }
  if (ds.glyph_side != model.config.input_side) {
    throw StructuralError("dataset glyph side " + std::to_string(ds.glyph_side) + " does not match model input " +
                          std::to_string(model.config.input_side));
  }
  const auto set = nn::to_labeled_set(*part);
  const auto ev = nn::evaluate(model.config, model.params, set);
  const auto rep = metrics::report(metrics::confusion(ev.predictions, set.labels, ds.class_names.size()));
  if (name.empty()) name = c.paths.model.stem().string();
  const auto row = metrics::csv_header() + metrics::csv_row(name, rep);
  std::cout << row;
  if (!c.paths.out.empty()) {
    const auto dir = out_dir(c);
    write_text(dir / "metrics.csv", row);
    write_text(dir / "metrics.txt", metrics::to_text(rep, ds.class_names));
  }
  return 0;
}

void write_segmentation(const fs::path& dir, const segmentation::SegmentedPage& page) {
  write_text(dir / "segmentation.tsv", report::segmentation_manifest(page.layout));
  imaging::write_pgm(dir / "binary.pgm", page.binary);
  const auto glyph_dir = dir / "glyphs";
  fs::create_directories(glyph_dir);
  for (std::size_t i = 0; i < page.glyphs.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%04zu.pgm", i);
    imaging::write_pgm(glyph_dir / name, page.glyphs[i].bits());
  }
}

int cmd_segment(const RunConfig& c) {
  const auto scan = imaging::read_gray(require(c.paths.scan, "scan"));
  const auto page = segmentation::segment_page(scan, c.segmentation);
  write_segmentation(out_dir(c), page);
  int lines = 0;
  for (const auto& b : page.layout.boxes) lines = std::max(lines, b.line_index + 1);
  std::cout << "boxes " << page.layout.boxes.size() << "\nlines " << lines << "\n";
  return 0;
}

int cmd_recognize(const RunConfig& c) {
  const auto model = nn::load_model(require(c.paths.model, "model"));
  const auto lex = lexicon::load_lexicon(require(c.paths.lexicon, "lexicon"));
  const auto scan = imaging::read_gray(require(c.paths.scan, "scan"));
  std::vector<std::string> truth;
  const auto catalog = name_set(model.config.class_names);
  if (!c.paths.truth.empty()) truth = lexicon::load_ground_truth(c.paths.truth, catalog.empty() ? nullptr : &catalog);

  auto params = c.segmentation;
  params.glyph_size = model.config.input_side;
  const auto rec = report::recognize_page(scan, model, lex, params);
  const auto dir = out_dir(c);
  write_segmentation(dir, rec.page);
  write_text(dir / "predictions.tsv", report::predictions_table(rec.page.layout, rec.predictions));
  write_text(dir / "translation.tsv", lexicon::format_translation(rec.translation));

  std::cout << "glyphs " << rec.signs.size() << "\nwords " << rec.translation.words.size() << "\nunmatched "
            << rec.translation.unmatched.size() << "\n";
  for (const auto& w : rec.translation.words) std::cout << "word " << w.akkadian << "\t" << w.english << "\n";
  if (!c.paths.truth.empty()) {
    const auto rep = report::render_report(rec.page.layout, rec.predictions, truth, scan);
    report::write_report(dir, rep);
    std::cout << rep.summary;
  }
  return 0;
}

int cmd_translate(const RunConfig& c, const std::string& signs, const std::string& signs_file) {
  const auto lex = lexicon::load_lexicon(require(c.paths.lexicon, "lexicon"));
  std::vector<std::string> seq;
  if (!signs_file.empty()) {
    std::ifstream in(signs_file, std::ios::binary);
    if (!in) throw IoError("cannot open sign list '" + signs_file + "'");
    seq = lexicon::parse_sign_list({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
  } else {
    seq = lexicon::parse_sign_list(signs);
  }
  const auto result = lexicon::translate_sequence(seq, lex);
  const auto text = lexicon::format_translation(result);
  std::cout << text;
  if (!c.paths.out.empty()) write_text(out_dir(c) / "translation.tsv", text);
  return 0;
}

int cmd_gradcheck(const RunConfig& c) {
  const auto& g = c.gradcheck;
  auto mc = c.model_config(static_cast<std::size_t>(g.num_classes));
  mc.input_side = g.input_side > 0 ? g.input_side : c.segmentation.glyph_size;
  nn::infer_shapes(mc);

  nn::GradcheckOptions opt;
  opt.step = g.step;
  opt.tolerance = g.tolerance;
  opt.batch = g.batch;
  opt.coords_per_tensor = g.coords_per_tensor;
  opt.seed = g.seed;
  if (g.fault_layer >= 0) {
    const auto layer = static_cast<std::size_t>(g.fault_layer);
    if (layer >= mc.layers.size() || nn::parameter_shapes(mc)[layer].empty()) {
      throw ConfigError("gradcheck.fault_layer " + std::to_string(layer) + " is not a layer with parameters");
    }
    opt.corrupt = [layer](nn::ModelParams<double>& grads) {
      for (auto& v : grads.layers[layer].weight.values()) v *= 1.5;
    };
  }

  bool ok = true;
  double worst = 0;
  auto run = [&](const std::string& label, const nn::ModelConfig& cfg) {
    const auto r = nn::gradcheck(cfg, opt);
    std::size_t checked = 0, skipped = 0;
    for (const auto& t : r.tensors) {
      checked += t.checked;
      skipped += t.skipped;
    }
    const double m = std::max(r.max_rel_error, r.input_max_rel_error);
    worst = std::max(worst, m);
    ok = ok && r.passed;
    std::printf("%-12s max_rel_error %.3e checked %zu skipped %zu %s\n", label.c_str(), m, checked, skipped,
                r.passed ? "ok" : "FAIL");
  };
  run("configured", mc);
  for (int i = 0; i < g.random_instances; ++i) {
    run("random-" + std::to_string(i), nn::random_small_config(mix(g.seed, static_cast<std::uint64_t>(i))));
  }
  std::printf("max_rel_error %.3e tolerance %.1e\n", worst, g.tolerance);
  if (!ok) throw VerificationError("gradient check failed");
  std::printf("PASS\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Activations are a few MB each; keep them on the heap instead of a fresh
  // mmap (and page faults) for every batch.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  CLI::App app{"Cuneiform sign recognition toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer(config_key_help());

  Globals g;
  PathFlags p;
  app.add_option("--config", g.config, "JSON run configuration");
  auto* seed_opt = app.add_option("--seed", g.seed, "override every seed in the config with children of this one");
  app.add_option("--out", g.out, "output directory");

  auto* synth_cmd = app.add_subcommand("synth", "generate a procedural wedge-glyph class catalog");
  synth_cmd->footer(config_key_help({"synth", "paths"}));

  auto* ds_cmd = app.add_subcommand("dataset", "build or re-split a glyph dataset");
  ds_cmd->require_subcommand(1);
  std::string packed;
  auto* build_cmd = ds_cmd->add_subcommand("build", "render variants and augmentations of every catalog class, then split");
  build_cmd->add_option("--catalog", p.catalog, "class catalog manifest");
  build_cmd->add_option("--packed", packed, "also write the packed single-file container here");
  build_cmd->footer(config_key_help({"paths", "segmentation", "dataset", "augmentation", "split"}));
  auto* split_cmd = ds_cmd->add_subcommand("split", "pool an existing dataset and split it again");
  split_cmd->add_option("--dataset", p.dataset, "dataset directory");
  split_cmd->add_option("--packed", packed, "also write the packed single-file container here");
  split_cmd->footer(config_key_help({"paths", "split"}));

  auto* train_cmd = app.add_subcommand("train", "train the classifier on a dataset's train/val splits");
  train_cmd->add_option("--dataset", p.dataset, "dataset directory");
  train_cmd->add_option("--model", p.model, "model file to write (default <out>/model.cnnm)");
  train_cmd->footer(config_key_help({"paths", "model", "train"}));

  std::string eval_split = "test", eval_name;
  auto* eval_cmd = app.add_subcommand("eval", "accuracy and macro precision/recall/F1 of a model on a split");
  eval_cmd->add_option("--model", p.model, "model file");
  eval_cmd->add_option("--dataset", p.dataset, "dataset directory");
  eval_cmd->add_option("--split", eval_split, "train, val or test")->capture_default_str();
  eval_cmd->add_option("--name", eval_name, "model name in the CSV row (default: model file stem)");
  eval_cmd->footer(config_key_help({"paths"}));

  auto* seg_cmd = app.add_subcommand("segment", "find glyph boxes in reading order and export normalized glyphs");
  seg_cmd->add_option("--scan", p.scan, "page image");
  seg_cmd->footer(config_key_help({"paths", "segmentation"}));

  auto* rec_cmd = app.add_subcommand("recognize", "segment, classify and translate a page; with --truth also report");
  rec_cmd->add_option("--model", p.model, "model file");
  rec_cmd->add_option("--lexicon", p.lexicon, "lexicon TSV");
  rec_cmd->add_option("--scan", p.scan, "page image");
  rec_cmd->add_option("--truth", p.truth, "ground-truth sign list in reading order");
  rec_cmd->footer(config_key_help({"paths", "segmentation"}));

  std::string signs, signs_file;
  auto* tr_cmd = app.add_subcommand("translate", "translate a sign sequence with the lexicon");
  tr_cmd->add_option("--lexicon", p.lexicon, "lexicon TSV");
  tr_cmd->add_option("--signs", signs, "sign names separated by commas or spaces");
  tr_cmd->add_option("--signs-file", signs_file, "file holding the sign names");
  tr_cmd->footer(config_key_help({"paths"}));

  auto* gc_cmd = app.add_subcommand("gradcheck", "compare analytic gradients with central finite differences");
  gc_cmd->footer(config_key_help({"model", "segmentation", "gradcheck"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  g.has_seed = seed_opt->count() > 0;

  try {
    const auto c = load_config(g, p);
    if (synth_cmd->parsed()) return cmd_synth(c);
    if (build_cmd->parsed()) return cmd_dataset_build(c, packed);
    if (split_cmd->parsed()) return cmd_dataset_split(c, packed);
    if (train_cmd->parsed()) return cmd_train(c);
    if (eval_cmd->parsed()) return cmd_eval(c, eval_split, eval_name);
    if (seg_cmd->parsed()) return cmd_segment(c);
    if (rec_cmd->parsed()) return cmd_recognize(c);
    if (tr_cmd->parsed()) return cmd_translate(c, signs, signs_file);
    if (gc_cmd->parsed()) return cmd_gradcheck(c);
  } catch (const Error& e) {
    std::fflush(stdout);
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
