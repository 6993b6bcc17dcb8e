#pragma once

#include <span>

#include "data/grid.hpp"

namespace cnf::eval {

double mae(const data::GridField& a, const data::GridField& b);
double rmse(const data::GridField& a, const data::GridField& b);

// Ensemble CRPS estimator, spatial mean of the per-pixel score
//   (1/n) Σ_i |x_i − y|  −  (1/2n²) Σ_i Σ_j |x_i − x_j|.
// A one-member ensemble reduces to the absolute error.
double crps_ensemble(std::span<const data::GridField> members, const data::GridField& truth);

// Per-pixel sample mean and population standard deviation across members.
struct EnsembleStats {
  data::GridField mean;
  data::GridField stddev;
  std::int64_t count = 0;
};
EnsembleStats ensemble_stats(std::span<const data::GridField> members);

// Block-wise additive correction: each s×s block of the result averages to
// the corresponding LR pixel exactly: y' = y + (x_block − mean(y_block)).
data::GridField apply_additive_constraint(const data::GridField& y_hr,
                                          const data::GridField& x_lr, std::int64_t s);

data::GridField error_map(const data::GridField& prediction, const data::GridField& truth);

// Central-difference gradient magnitude (one-sided at the borders).
data::GridField gradient_magnitude(const data::GridField& field);

// Spearman rank correlation (average ranks for ties).
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace cnf::eval
