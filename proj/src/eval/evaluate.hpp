#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "data/dataset.hpp"
#include "eval/metrics.hpp"
#include "model/model.hpp"

namespace cnf::eval {

enum class Variant { bicubic, cnf, cnf_perceptual, cnf_constraint };

const char* variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& name);

struct VariantMetrics {
  std::string name;
  std::vector<double> mae, rmse, crps;  // per test sample
  double tau = 0.8;
  std::int64_t ensemble_n = 20;

  double mean(const std::vector<double>& v) const;
  double stddev(const std::vector<double>& v) const;  // population
};

struct MetricsReport {
  std::vector<VariantMetrics> rows;
  // One row per variant: variant,MAE,MAE_std,RMSE,RMSE_std,CRPS,CRPS_std.
  std::string to_csv() const;
};

struct EvalOptions {
  double tau = 0.8;
  std::int64_t ensemble_n = 20;
  std::uint64_t base_seed = 0;          // sample i uses ensemble base seed base_seed + i
  std::filesystem::path map_dir;        // empty disables map emission
  std::int64_t map_limit = 0;           // 0 = maps for every test sample
};

// Scores one variant over the test split. Flow variants use the ensemble
// mean for the point metrics and the full ensemble for CRPS; the
// deterministic baseline is scored as a one-member ensemble (CRPS = MAE).
// When map emission is enabled, per-sample absolute-error maps (and, for
// flow variants, ensemble standard-deviation maps) are written as CNFG
// fields plus grayscale images.
VariantMetrics evaluate_variant(Variant v, const model::FlowModel* flow,
                                std::span<const data::PairedSample> test,
                                const EvalOptions& opts);

}  // namespace cnf::eval
