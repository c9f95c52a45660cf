#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "cuneiform/dataset.hpp"
#include "cuneiform/nn/serialize.hpp"
#include "cuneiform/synth.hpp"
#include "test_util.hpp"

using namespace cuneiform;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string output;
};

Run run(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(CUNEIFORM_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, test::read_text(log)};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// A tiny dataset written with the library: 3 classes at the given side.
void small_dataset(const fs::path& dir, int side) {
  dataset::Dataset ds;
  ds.class_names = {"A", "B", "C"};
  ds.glyph_side = side;
  std::vector<dataset::Sample> samples;
  for (std::size_t c = 0; c < 3; ++c) {
    for (int v = 0; v < 10; ++v) {
      imaging::BinaryImage img(side, side);
      for (int k = 0; k < side; ++k) img.set(k, (static_cast<int>(c) * 5 + v) % side, true);
      samples.push_back({segmentation::GlyphImage(img), c, v, 0});
    }
  }
  ds.split = dataset::split_dataset(samples, {});
  dataset::save_dataset(dir, ds);
}

}  // namespace

TEST_CASE("help exits 0 and lists config keys") {
  test::TempDir dir("cli_help");
  const auto log = dir.path / "log";
  const auto top = run("--help", log);
  CHECK(top.code == 0);
  CHECK(top.output.find("segmentation.target_width") != std::string::npos);
  for (const char* sub : {"synth", "dataset", "dataset build", "dataset split", "train", "eval", "segment",
                          "recognize", "translate", "gradcheck"}) {
    const auto r = run(std::string(sub) + " --help", log);
    INFO(sub);
    CHECK(r.code == 0);
    CHECK(r.output.find("Config keys") != std::string::npos);
  }
  CHECK(run("train --help", log).output.find("train.patience") != std::string::npos);
  CHECK(run("gradcheck --help", log).output.find("gradcheck.tolerance") != std::string::npos);
}

TEST_CASE("config and usage errors exit 2") {
  test::TempDir dir("cli_cfg");
  const auto log = dir.path / "log";
  write(dir.path / "unknown.json", R"({"train": {"max_epochs": 3, "learning_rat": 0.1}})");
  const auto r = run("--config " + (dir.path / "unknown.json").string() + " synth --out " + dir.path.string(), log);
  CHECK(r.code == 2);
  CHECK(r.output.find("learning_rat") != std::string::npos);

  write(dir.path / "empty_layers.json", R"({"model": {"layers": []}})");
  CHECK(run("--config " + (dir.path / "empty_layers.json").string() + " gradcheck", log).code == 2);

  write(dir.path / "bad_type.json", R"({"split": {"seed": "seven"}})");
  CHECK(run("--config " + (dir.path / "bad_type.json").string() + " gradcheck", log).code == 2);
  CHECK(run("no-such-command", log).code == 2);
  CHECK(run("train --dataset", log).code == 2);
}

TEST_CASE("I/O errors exit 3") {
  test::TempDir dir("cli_io");
  const auto log = dir.path / "log";
  CHECK(run("dataset build --catalog /nonexistent/catalog.tsv --out " + (dir.path / "d").string(), log).code == 3);
  CHECK(run("--config /nonexistent/config.json gradcheck", log).code == 3);

  small_dataset(dir.path / "ds", 16);
  const auto cfg = nn::default_config(3, 16);
  nn::save_model(dir.path / "m.cnnm", {cfg, nn::init_params<float>(cfg)});
  CHECK(run("eval --model " + (dir.path / "m.cnnm").string() + " --dataset " + (dir.path / "ds").string(), log).code == 0);

  auto bytes = test::read_bytes(dir.path / "m.cnnm");
  bytes[bytes.size() / 2] ^= 0xFF;
  test::write_bytes(dir.path / "bad.cnnm", bytes);
  CHECK(run("eval --model " + (dir.path / "bad.cnnm").string() + " --dataset " + (dir.path / "ds").string(), log).code == 3);

  // corrupt manifest row
  {
    auto text = test::read_text(dir.path / "ds" / "manifest.tsv");
    text.insert(text.find('\n') + 1, "0\tA\tnot-a-number\t0\ttrain\tx.pgm\n");
    write(dir.path / "ds" / "manifest.tsv", text);
  }
  CHECK(run("train --dataset " + (dir.path / "ds").string() + " --out " + (dir.path / "t").string(), log).code == 3);

  CHECK(run("translate --lexicon /nonexistent/lex.tsv --signs SUM", log).code == 3);
  CHECK(run("recognize --model " + (dir.path / "m.cnnm").string() + " --lexicon /nonexistent/lex.tsv --scan x.pgm --out " +
                (dir.path / "r").string(),
            log)
            .code == 3);
}

TEST_CASE("structural mismatch exits 2") {
  test::TempDir dir("cli_struct");
  const auto log = dir.path / "log";
  small_dataset(dir.path / "ds24", 24);
  const auto cfg = nn::default_config(3, 16);
  nn::save_model(dir.path / "m16.cnnm", {cfg, nn::init_params<float>(cfg)});
  const auto r = run("eval --model " + (dir.path / "m16.cnnm").string() + " --dataset " + (dir.path / "ds24").string(), log);
  CHECK(r.code == 2);
}

TEST_CASE("gradcheck exit codes") {
  test::TempDir dir("cli_grad");
  const auto log = dir.path / "log";
  write(dir.path / "small.json", R"({"gradcheck": {"input_side": 16, "random_instances": 4}})");
  const auto ok = run("--config " + (dir.path / "small.json").string() + " gradcheck", log);
  INFO(ok.output);
  CHECK(ok.code == 0);
  write(dir.path / "fault.json", R"({"gradcheck": {"input_side": 16, "random_instances": 0, "fault_layer": 0}})");
  CHECK(run("--config " + (dir.path / "fault.json").string() + " gradcheck", log).code == 5);
}

TEST_CASE("training divergence exits 4") {
  test::TempDir dir("cli_div");
  const auto log = dir.path / "log";
  small_dataset(dir.path / "ds", 16);
  write(dir.path / "wild.json", R"({"train": {"learning_rate": 1e300, "max_epochs": 3}})");
  const auto r = run("--config " + (dir.path / "wild.json").string() + " train --dataset " + (dir.path / "ds").string() +
                         " --out " + (dir.path / "t").string(),
                     log);
  INFO(r.output);
  CHECK(r.code == 4);
  CHECK(fs::exists(dir.path / "t" / "train_log.csv"));
}

TEST_CASE("small end-to-end run is deterministic") {
  test::TempDir dir("cli_e2e");
  const auto log = dir.path / "log";
  const auto d = dir.path.string();
  write(dir.path / "c.json", R"({"segmentation": {"glyph_size": 16}, "synth": {"classes": 3},
      "dataset": {"variants": 3, "augmentations": 1}, "train": {"max_epochs": 2}})");
  const std::string cfg = "--config " + d + "/c.json ";
  REQUIRE(run(cfg + "synth --out " + d + "/cat", log).code == 0);
  REQUIRE(run(cfg + "dataset build --catalog " + d + "/cat/catalog.tsv --out " + d + "/ds", log).code == 0);
  for (const char* t : {"t1", "t2"}) REQUIRE(run(cfg + "train --dataset " + d + "/ds --out " + d + "/" + t, log).code == 0);
  CHECK(test::read_bytes(dir.path / "t1" / "model.cnnm") == test::read_bytes(dir.path / "t2" / "model.cnnm"));
  const auto ev = run(cfg + "eval --model " + d + "/t1/model.cnnm --dataset " + d + "/ds --out " + d + "/ev", log);
  CHECK(ev.code == 0);
  CHECK(ev.output.find("model,accuracy,precision,recall,f1") != std::string::npos);

  // blank scan: empty outputs, success
  write(dir.path / "lex.tsv", "SUM,MA\tšumma\tif\n");
  {
    std::ofstream pgm(dir.path / "blank.pgm", std::ios::binary);
    pgm << "P5\n200 100\n255\n" << std::string(200 * 100, '\xEB');
  }
  const auto rec = run(cfg + "recognize --model " + d + "/t1/model.cnnm --lexicon " + d + "/lex.tsv --scan " + d +
                           "/blank.pgm --out " + d + "/rec",
                       log);
  INFO(rec.output);
  CHECK(rec.code == 0);
  CHECK(fs::exists(dir.path / "rec" / "translation.tsv"));

  const auto tr = run("translate --lexicon " + d + "/lex.tsv --signs SUM,MA,LA", log);
  CHECK(tr.code == 0);
  CHECK(tr.output.find("if") != std::string::npos);
}
