// Exercises the installed CLI binary end to end. The binary path arrives as
// argv[1] (wired up by CMake).
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "refvos/dataset.hpp"

namespace {

std::string g_binary;
std::filesystem::path g_dir;

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run(const std::string& args) {
  auto out_file = g_dir / "cmd_output.txt";
  std::string cmd = g_binary + " " + args + " > " + out_file.string() + " 2>&1";
  int rc = std::system(cmd.c_str());
  std::ifstream in(out_file);
  std::string output((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return {WEXITSTATUS(rc), output};
}

int count_files(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir)) return -1;
  int n = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) ++n;
  return n;
}

}  // namespace

TEST_CASE("help lists verbs and per-verb config keys") {
  auto r = run("--help");
  CHECK(r.exit_code == 0);
  for (const char* verb :
       {"generate", "train", "infer", "eval", "annotate", "train-selector", "ablate"})
    CHECK(r.output.find(verb) != std::string::npos);

  r = run("generate --help");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("Config keys honored") != std::string::npos);
  CHECK(r.output.find("world.seed") != std::string::npos);

  r = run("train --help");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("loss.lambda_ce") != std::string::npos);
  CHECK(r.output.find("memory.infer_stride") != std::string::npos);
}

TEST_CASE("unknown flags and keys exit with usage code 2") {
  auto r = run("generate --out " + (g_dir / "x").string() + " --frobnicate");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("error") != std::string::npos);

  r = run("no-such-verb");
  CHECK(r.exit_code == 2);

  r = run("generate --out " + (g_dir / "x").string() + " bogus.key=3");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("bogus.key") != std::string::npos);
}

TEST_CASE("generate / train / infer / eval pipeline") {
  auto data = g_dir / "data";
  auto r = run("generate --out " + data.string() +
               " world.num_videos=3 world.frames_per_video=6 world.shapes_per_video=2 "
               "world.expressions_per_object=2 world.seed=5");
  CHECK(r.exit_code == 0);
  CHECK(std::filesystem::exists(data / "meta.json"));
  CHECK(std::filesystem::exists(data / "Frames"));
  CHECK(std::filesystem::exists(data / "Annotations"));

  // Re-running without --force fails (runtime error, exit 1).
  r = run("generate --out " + data.string() + " world.num_videos=1");
  CHECK(r.exit_code == 1);

  auto run_dir = g_dir / "run";
  r = run("train --data " + data.string() + " --out " + run_dir.string() +
          " model.d_model=16 model.layers=2 model.heads=2 model.n_context=2 model.n_query=2 "
          "model.max_frames=8 train.steps=2 train.batch_size=1 train.checkpoint_every=2 "
          "train.warmup_steps=1 train.threads=2");
  CHECK(r.exit_code == 0);
  auto ckpt = run_dir / "step_2" / "checkpoint.bin";
  REQUIRE(std::filesystem::exists(ckpt));

  auto pred = g_dir / "pred";
  r = run("infer --checkpoint " + ckpt.string() + " --data " + data.string() + " --out " +
          pred.string());
  CHECK(r.exit_code == 0);
  // One mask per (sample, frame): 3 videos x 4 samples-ish x 6 frames.
  refvos::Dataset ds = refvos::load_dataset(data);
  CHECK(count_files(pred) == static_cast<int>(ds.samples.size()) * 6);

  r = run("eval --pred " + pred.string() + " --data " + data.string() + " --name smoke");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("J&F=") != std::string::npos);

  // Annotate + selector training round trip.
  auto labels = g_dir / "labels.tsv";
  r = run("annotate --checkpoint " + ckpt.string() + " --data " + data.string() + " --out " +
          labels.string() + " selector.label_fraction=0.5");
  CHECK(r.exit_code == 0);
  REQUIRE(std::filesystem::exists(labels));

  auto sel_ckpt = g_dir / "selector.bin";
  r = run("train-selector --labels " + labels.string() + " --data " + data.string() +
          " --out " + sel_ckpt.string() +
          " model.d_model=16 model.layers=2 model.heads=2 model.max_frames=8 "
          "selector.steps=2 selector.batch_size=1");
  CHECK(r.exit_code == 0);
  REQUIRE(std::filesystem::exists(sel_ckpt));

  auto pred_sel = g_dir / "pred_sel";
  r = run("infer --checkpoint " + ckpt.string() + " --data " + data.string() + " --out " +
          pred_sel.string() + " --use-selector --selector-checkpoint " + sel_ckpt.string());
  CHECK(r.exit_code == 0);
  CHECK(count_files(pred_sel) == static_cast<int>(ds.samples.size()) * 6);
}

TEST_CASE("ablate emits the six-row table") {
  auto out = g_dir / "ablate";
  auto r = run("ablate --out " + out.string() +
               " world.num_videos=3 world.frames_per_video=6 world.shapes_per_video=2 "
               "world.expressions_per_object=2 world.seed=5 "
               "model.d_model=16 model.layers=2 model.heads=2 model.n_context=2 "
               "model.n_query=2 model.max_frames=8 "
               "train.steps=2 train.batch_size=1 train.checkpoint_every=0 "
               "train.warmup_steps=1 selector.steps=2 selector.batch_size=1 "
               "ablate.val_videos=1 eval.max_samples=2");
  CHECK(r.exit_code == 0);
  auto table = out / "table.txt";
  REQUIRE(std::filesystem::exists(table));
  std::ifstream in(table);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  for (const char* row : {"global-only", "local-only", "glu", "glu+mb", "glu+mb+oc",
                          "glu+mb+oc+kfs"})
    CHECK(text.find(row) != std::string::npos);
  CHECK(text.find("J&F") != std::string::npos);
}

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <refvos-binary> [doctest args]\n", argv[0]);
    return 1;
  }
  g_binary = argv[1];
  g_dir = std::filesystem::temp_directory_path() / "refvos_cli_tests";
  std::filesystem::remove_all(g_dir);
  std::filesystem::create_directories(g_dir);
  doctest::Context ctx;
  ctx.applyCommandLine(argc - 1, argv + 1);
  return ctx.run();
}
