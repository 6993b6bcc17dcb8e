#pragma once

#include <filesystem>
#include <vector>

#include "data/dataset.hpp"
#include "model/model.hpp"
#include "train/optim.hpp"

namespace cnf::train {

struct EpochStats {
  std::int64_t epoch = 0;
  std::int64_t step = 0;  // optimizer steps completed
  double lr = 0.0;
  double train_bpd = 0.0;
  double val_bpd = 0.0;
};

struct FitResult {
  std::vector<EpochStats> log;
  std::vector<double> step_losses;             // one entry per optimizer step
  std::vector<std::vector<double>> ema_shadow;  // final averaged weights
};

// Objective for one batch: mean bits/dim plus λ times the pixel MSE between a
// τ-tempered sample and the ground truth. Member i of the batch samples with
// seed sample_seed + i.
ad::TensorPtr batch_loss(ad::Graph& g, const model::FlowModel& model,
                         std::span<const data::PairedSample> batch, double lambda, double tau,
                         std::uint64_t sample_seed);

// Full training loop: seeded shuffles and target jitter, Adam with the step
// decay schedule, EMA tracking, per-epoch validation with the averaged
// weights, per-epoch checkpoints, and an append-only text log
// "epoch,step,lr,train_bpd,val_bpd". Deterministic for a fixed config.
// resume_epoch skips the first epochs of the schedule (parameters must
// already hold the matching checkpoint). Throws errc::diverged on a
// non-finite loss or gradient; checkpoints up to the last good epoch remain
// on disk.
FitResult fit(model::FlowModel& model, const data::Dataset& dataset, const TrainConfig& cfg,
              const std::filesystem::path& out_dir = {}, std::int64_t resume_epoch = 0);

}  // namespace cnf::train
