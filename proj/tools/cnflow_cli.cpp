// Command-line front end for the cnflow shared library. All functionality
// goes through the public C API; this file only parses arguments and maps
// them onto config keys.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "cnflow.h"

namespace {

struct ConfigDeleter {
  void operator()(cnf_config* c) const { cnf_config_free(c); }
};
using ConfigPtr = std::unique_ptr<cnf_config, ConfigDeleter>;

int fail_with(cnf_status status, const char* what) {
  std::fprintf(stderr, "cnflow %s: %s: %s\n", what, cnf_status_name(status), cnf_last_error());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cnflow — conditional-flow downscaling of gridded scalar fields"};
  app.require_subcommand(1);

  std::string config_path, out_dir, manifest, checkpoint, checkpoint_perceptual, input_grid,
      variants, resume_checkpoint;
  std::int64_t seed = 0, count = -1, epochs = -1, ensemble_n = 20, resume_epoch = -1;
  double tau = 0.8;
  bool force = false;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "configuration file (key = value lines)");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--seed", seed, "base random seed");
    cmd->add_flag("--force", force, "overwrite a non-empty output directory");
  };

  auto* generate = app.add_subcommand("generate", "write a synthetic corpus and its manifest");
  add_common(generate);
  generate->add_option("--count", count, "number of fields");

  auto* train = app.add_subcommand("train", "train a model from a corpus manifest");
  add_common(train);
  train->add_option("--manifest", manifest, "corpus manifest path");
  train->add_option("--epochs", epochs, "override epoch count");
  train->add_option("--resume", resume_checkpoint, "checkpoint to resume from");
  train->add_option("--resume-epoch", resume_epoch, "epoch the resume checkpoint ended");

  auto* sample = app.add_subcommand("sample", "draw samples from a trained model");
  add_common(sample);
  sample->add_option("--checkpoint", checkpoint, "model checkpoint");
  sample->add_option("--input", input_grid, "low-resolution CNFG input");
  sample->add_option("--tau", tau, "sampling temperature")->capture_default_str();
  sample->add_option("--n", ensemble_n, "number of samples")->capture_default_str();

  auto* evaluate = app.add_subcommand("evaluate", "score variants on the test split");
  add_common(evaluate);
  evaluate->add_option("--manifest", manifest, "corpus manifest path");
  evaluate->add_option("--checkpoint", checkpoint, "flow checkpoint");
  evaluate->add_option("--checkpoint-perceptual", checkpoint_perceptual,
                       "perceptual-loss variant checkpoint");
  evaluate->add_option("--variants", variants,
                       "comma list from bicubic,cnf,cnf_perceptual,cnf_constraint");
  evaluate->add_option("--tau", tau, "sampling temperature")->capture_default_str();
  evaluate->add_option("--n", ensemble_n, "ensemble members per sample")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  cnf_config* raw = nullptr;
  if (auto s = cnf_config_create(&raw)) return fail_with(s, "config");
  ConfigPtr cfg(raw);

  if (!config_path.empty())
    if (auto s = cnf_config_load(cfg.get(), config_path.c_str()))
      return fail_with(s, "config load");

  const auto set = [&](const char* key, const std::string& value) -> bool {
    if (auto s = cnf_config_set(cfg.get(), key, value.c_str())) {
      fail_with(s, "config set");
      return false;
    }
    return true;
  };
  const auto set_if = [&](bool given, const char* key, const std::string& value) {
    return !given || set(key, value);
  };

  CLI::App* cmd = app.get_subcommands().front();
  const bool has_tau = cmd == sample || cmd == evaluate;
  bool ok = set_if(!out_dir.empty(), "out_dir", out_dir) &&
            set_if(cmd->count("--seed") > 0, "seed", std::to_string(seed)) &&
            set_if(count >= 0, "corpus_size", std::to_string(count)) &&
            set_if(!manifest.empty(), "manifest", manifest) &&
            set_if(epochs >= 0, "epochs", std::to_string(epochs)) &&
            set_if(!resume_checkpoint.empty(), "resume_checkpoint", resume_checkpoint) &&
            set_if(resume_epoch >= 0, "resume_epoch", std::to_string(resume_epoch)) &&
            set_if(!checkpoint.empty(), "checkpoint", checkpoint) &&
            set_if(!checkpoint_perceptual.empty(), "checkpoint_perceptual",
                   checkpoint_perceptual) &&
            set_if(!input_grid.empty(), "input_grid", input_grid) &&
            set_if(!variants.empty(), "eval_variants", variants) &&
            set_if(has_tau && cmd->count("--tau") > 0, "tau", std::to_string(tau)) &&
            set_if(has_tau && cmd->count("--n") > 0, "ensemble_n", std::to_string(ensemble_n));
  if (!ok) return 1;

  cnf_status status = CNF_OK;
  if (cmd == generate)
    status = cnf_run_generate(cfg.get(), force ? 1 : 0);
  else if (cmd == train)
    status = cnf_run_train(cfg.get());
  else if (cmd == sample)
    status = cnf_run_sample(cfg.get());
  else
    status = cnf_run_evaluate(cfg.get());

  if (status != CNF_OK) return fail_with(status, cmd->get_name().c_str());
  return 0;
}
