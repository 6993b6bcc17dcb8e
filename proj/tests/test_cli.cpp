// Drives the installed CLI binary end to end through a shell, the way a
// user would.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = CNFLOW_CLI_PATH;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  return std::system(cmd.c_str());
}

fs::path fresh(const std::string& name) {
  auto p = fs::temp_directory_path() / "cnflow_cli_test" / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

}  // namespace

TEST_CASE("help and bad invocations") {
  CHECK(run("--help") == 0);
  CHECK(run("") != 0);             // a subcommand is required
  CHECK(run("frobnicate") != 0);   // unknown subcommand
}

TEST_CASE("generate, train, sample, evaluate round trip") {
  const auto corpus = fresh("corpus");
  CHECK(run("generate --out " + corpus.string() + " --count 12 --seed 3") == 0);
  CHECK(fs::exists(corpus / "manifest.txt"));
  CHECK(fs::exists(corpus / "field_00011.cnfg"));

  // Refusal without --force, success with it.
  CHECK(run("generate --out " + corpus.string() + " --count 12 --seed 3") != 0);
  CHECK(run("generate --out " + corpus.string() + " --count 12 --seed 3 --force") == 0);

  // A compact config for the training steps.
  const auto cfg_path = fresh("cfg") / "desk.cfg";
  fs::create_directories(cfg_path.parent_path());
  {
    std::ofstream cfg(cfg_path);
    cfg << "hr_height = 16\nhr_width = 16\nhidden_channels = 8\ncond_channels = 8\n"
           "batch_size = 8\nensemble_n = 3\nseed = 3\n";
  }

  const auto train_out = fresh("train");
  CHECK(run("train --config " + cfg_path.string() + " --manifest " +
            (corpus / "manifest.txt").string() + " --out " + train_out.string() +
            " --epochs 1") == 0);
  CHECK(fs::exists(train_out / "checkpoint_ema.cnfm"));
  CHECK(fs::exists(train_out / "train_log.txt"));
  CHECK(fs::exists(train_out / "config.txt"));

  const auto sample_out = fresh("samples");
  CHECK(run("sample --config " + cfg_path.string() + " --checkpoint " +
            (train_out / "checkpoint_ema.cnfm").string() + " --input " +
            (corpus / "field_00000.cnfg").string() + " --out " + sample_out.string() +
            " --tau 0 --n 2") == 0);
  CHECK(fs::exists(sample_out / "sample_000.cnfg"));
  CHECK(fs::exists(sample_out / "sample_001.pgm"));

  const auto eval_out = fresh("eval");
  CHECK(run("evaluate --config " + cfg_path.string() + " --manifest " +
            (corpus / "manifest.txt").string() + " --checkpoint " +
            (train_out / "checkpoint_ema.cnfm").string() + " --out " + eval_out.string() +
            " --n 3") == 0);
  CHECK(fs::exists(eval_out / "metrics.csv"));

  // Missing checkpoint for a requested variant fails loudly.
  CHECK(run("evaluate --config " + cfg_path.string() + " --manifest " +
            (corpus / "manifest.txt").string() + " --out " + fresh("eval2").string() +
            " --variants bicubic,cnf_perceptual") != 0);
}
