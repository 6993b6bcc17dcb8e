#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "model/model.hpp"
#include "train/optim.hpp"

namespace cnf::run {

// One flat configuration for every command. Every field has a default; the
// file form is "key = value" lines (blank lines and '#' comments allowed) and
// unknown keys are errors. Defaults describe the desk-scale experiment:
// 2,000 synthetic 32×32 fields, 2× upsampling, 2 scales, 10 epochs, with the
// decay interval and EMA horizon rescaled to that step budget. The reference
// full-scale constants (2e-4 learning rate, decay 0.5 every 200,000 steps,
// EMA 0.999, 35 epochs, 3 scales) remain the library-level defaults in
// TrainConfig/ModelConfig.
struct RunConfig {
  // synthetic corpus generation
  std::int64_t corpus_size = 2000;
  std::int64_t hr_height = 32;
  std::int64_t hr_width = 32;
  double grf_beta = 3.0;

  // pairing and model shape
  std::int64_t scale = 2;
  std::int64_t num_scales = 2;
  std::int64_t steps_per_scale = 2;
  std::int64_t hidden_channels = 64;
  std::int64_t cond_channels = 64;

  // optimization
  double lr0 = 2e-4;
  double lr_decay = 0.5;
  std::int64_t lr_decay_interval = 2000;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double adam_eps = 1e-8;
  double ema_decay = 0.99;
  std::int64_t epochs = 10;
  std::int64_t batch_size = 16;
  double perceptual_weight = 0.0;
  double jitter = 1e-3;
  double grad_clip = 100.0;
  bool actnorm_data_init = true;

  // sampling and evaluation
  double tau = 0.8;
  std::int64_t ensemble_n = 20;
  std::string eval_variants = "bicubic,cnf,cnf_constraint";
  std::int64_t map_limit = 0;  // 0 = maps for all test samples

  // paths
  std::string out_dir = "out";
  std::string manifest;
  std::string checkpoint;
  std::string checkpoint_perceptual;
  std::string input_grid;
  std::string resume_checkpoint;
  std::int64_t resume_epoch = 0;

  std::uint64_t seed = 0;

  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  void load_file(const std::filesystem::path& path);
  void save_file(const std::filesystem::path& path) const;

  model::ModelConfig model_config() const;
  train::TrainConfig train_config() const;
};

}  // namespace cnf::run
