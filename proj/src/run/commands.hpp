#pragma once

#include "run/config.hpp"

namespace cnf::run {

// Command implementations shared by the CLI and the C API. Each writes its
// artifacts plus the effective config into cfg.out_dir, and is deterministic
// for a fixed config: reruns produce byte-identical numeric outputs.

// Synthetic corpus: corpus_size spectral fields with seeds seed…seed+N-1,
// plus a manifest. Refuses an existing non-empty output directory unless
// `force` is set.
void run_generate(const RunConfig& cfg, bool force);

// Data pipeline + training; writes per-epoch checkpoints, the final and
// EMA-weight checkpoints, and the training log.
void run_train(const RunConfig& cfg);

// ensemble_n samples from a checkpoint at the configured temperature, as
// CNFG fields plus grayscale images.
void run_sample(const RunConfig& cfg);

// Metrics CSV over the test split for the configured variants, plus
// per-sample error and uncertainty maps.
void run_evaluate(const RunConfig& cfg);

}  // namespace cnf::run
