#include "eval/evaluate.hpp"

#include <cmath>
#include <cstdio>

#include "eval/bicubic.hpp"

namespace cnf::eval {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::bicubic: return "bicubic";
    case Variant::cnf: return "cnf";
    case Variant::cnf_perceptual: return "cnf_perceptual";
    case Variant::cnf_constraint: return "cnf_constraint";
  }
  return "?";
}

std::optional<Variant> variant_from_name(const std::string& name) {
  for (Variant v : {Variant::bicubic, Variant::cnf, Variant::cnf_perceptual,
                    Variant::cnf_constraint})
    if (name == variant_name(v)) return v;
  return std::nullopt;
}

double VariantMetrics::mean(const std::vector<double>& v) const {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double VariantMetrics::stddev(const std::vector<double>& v) const {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  double sq = 0.0;
  for (double x : v) sq += (x - m) * (x - m);
  return std::sqrt(sq / static_cast<double>(v.size()));
}

std::string MetricsReport::to_csv() const {
  std::string out = "variant,MAE,MAE_std,RMSE,RMSE_std,CRPS,CRPS_std\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.name.c_str(),
                  r.mean(r.mae), r.stddev(r.mae), r.mean(r.rmse), r.stddev(r.rmse),
                  r.mean(r.crps), r.stddev(r.crps));
    out += buf;
  }
  return out;
}

namespace {

void emit_map(const std::filesystem::path& dir, const char* stem, std::size_t index,
              const data::GridField& field) {
  char name[64];
  std::snprintf(name, sizeof name, "%s_%05zu", stem, index);
  data::write_grid(field, dir / (std::string(name) + ".cnfg"));
  data::write_pgm(field, dir / (std::string(name) + ".pgm"));
}

}  // namespace

VariantMetrics evaluate_variant(Variant v, const model::FlowModel* flow,
                                std::span<const data::PairedSample> test,
                                const EvalOptions& opts) {
  require(!test.empty(), errc::invalid_argument, "evaluate: empty test split");
  const bool is_flow = v != Variant::bicubic;
  if (is_flow)
    require(flow != nullptr, errc::invalid_argument,
            std::string("evaluate: variant ") + variant_name(v) + " needs a model");

  VariantMetrics out;
  out.name = variant_name(v);
  out.tau = opts.tau;
  out.ensemble_n = is_flow ? opts.ensemble_n : 1;

  std::filesystem::path map_dir;
  if (!opts.map_dir.empty()) {
    map_dir = opts.map_dir / out.name;
    std::filesystem::create_directories(map_dir);
  }

  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& pair = test[i];
    std::vector<data::GridField> members;
    if (is_flow) {
      members = flow->sample_ensemble(pair.x_lr, opts.tau, opts.ensemble_n,
                                      opts.base_seed + static_cast<std::uint64_t>(i));
      if (v == Variant::cnf_constraint)
        for (auto& m : members) m = apply_additive_constraint(m, pair.x_lr, pair.s);
    } else {
      members.push_back(bicubic_upsample(pair.x_lr, pair.s));
    }
    const auto stats = ensemble_stats(members);
    const data::GridField& point = members.size() == 1 ? members[0] : stats.mean;
    out.mae.push_back(mae(point, pair.y_hr));
    out.rmse.push_back(rmse(point, pair.y_hr));
    out.crps.push_back(crps_ensemble(members, pair.y_hr));

    const bool want_map =
        !map_dir.empty() && (opts.map_limit <= 0 || static_cast<std::int64_t>(i) < opts.map_limit);
    if (want_map) {
      emit_map(map_dir, "err", i, error_map(point, pair.y_hr));
      if (is_flow && members.size() > 1) emit_map(map_dir, "std", i, stats.stddev);
    }
  }
  return out;
}

}  // namespace cnf::eval
