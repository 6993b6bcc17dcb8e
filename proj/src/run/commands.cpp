#include "run/commands.hpp"

#include <cstdio>
#include <fstream>

#include "data/grf.hpp"
#include "eval/evaluate.hpp"
#include "train/trainer.hpp"

namespace cnf::run {

namespace {

namespace fs = std::filesystem;

void prepare_out_dir(const RunConfig& cfg, bool force) {
  const fs::path out(cfg.out_dir);
  require(!out.empty(), errc::invalid_argument, "out_dir must not be empty");
  if (fs::exists(out) && !fs::is_empty(out))
    require(force, errc::already_exists,
            "output directory " + out.string() + " is not empty (use --force to overwrite)");
  fs::create_directories(out);
}

void write_effective_config(const RunConfig& cfg) {
  cfg.save_file(fs::path(cfg.out_dir) / "config.txt");
}

model::FlowModel load_model(const std::string& path, const char* what) {
  require(!path.empty(), errc::invalid_argument,
          std::string("missing checkpoint for ") + what);
  return model::FlowModel::load(path).model;
}

}  // namespace

void run_generate(const RunConfig& cfg, bool force) {
  prepare_out_dir(cfg, force);
  const fs::path out(cfg.out_dir);
  require(cfg.corpus_size >= 0, errc::invalid_argument, "corpus_size must be >= 0");
  std::vector<std::string> entries;
  for (std::int64_t i = 0; i < cfg.corpus_size; ++i) {
    const auto field =
        data::generate_grf(cfg.seed + static_cast<std::uint64_t>(i), cfg.hr_height,
                           cfg.hr_width, cfg.grf_beta);
    char name[48];
    std::snprintf(name, sizeof name, "field_%05lld.cnfg", static_cast<long long>(i));
    data::write_grid(field, out / name);
    entries.emplace_back(name);
  }
  data::write_manifest(entries, out / "manifest.txt");
  write_effective_config(cfg);
}

void run_train(const RunConfig& cfg) {
  require(!cfg.manifest.empty(), errc::invalid_argument, "train: no manifest configured");
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);

  const auto corpus = data::load_corpus(cfg.manifest);
  const auto dataset = data::build_dataset(corpus, cfg.scale, cfg.seed);

  std::int64_t resume_epoch = 0;
  model::FlowModel model = [&] {
    if (!cfg.resume_checkpoint.empty()) {
      resume_epoch = cfg.resume_epoch;
      return model::FlowModel::load(cfg.resume_checkpoint).model;
    }
    return model::FlowModel(cfg.model_config(), cfg.seed);
  }();

  auto result = train::fit(model, dataset, cfg.train_config(), out, resume_epoch);

  model.save(out / "checkpoint_final.cnfm", &result.ema_shadow);
  // EMA checkpoint: averaged weights as the live parameters.
  auto params = model.parameters();
  auto shadow = result.ema_shadow;
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.swap(shadow[i]);
  model.save(out / "checkpoint_ema.cnfm");
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value.swap(shadow[i]);
  write_effective_config(cfg);
}

void run_sample(const RunConfig& cfg) {
  require(!cfg.input_grid.empty(), errc::invalid_argument, "sample: no input grid configured");
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);
  auto model = load_model(cfg.checkpoint, "sampling");
  const auto x_lr = data::read_grid(cfg.input_grid);
  require(cfg.ensemble_n >= 1, errc::invalid_argument, "sample: ensemble_n must be >= 1");
  const auto samples = model.sample_ensemble(x_lr, cfg.tau, cfg.ensemble_n, cfg.seed);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    char name[48];
    std::snprintf(name, sizeof name, "sample_%03zu", i);
    data::write_grid(samples[i], out / (std::string(name) + ".cnfg"));
    data::write_pgm(samples[i], out / (std::string(name) + ".pgm"));
  }
  write_effective_config(cfg);
}

void run_evaluate(const RunConfig& cfg) {
  require(!cfg.manifest.empty(), errc::invalid_argument, "evaluate: no manifest configured");
  const fs::path out(cfg.out_dir);
  fs::create_directories(out);

  const auto corpus = data::load_corpus(cfg.manifest);
  const auto dataset = data::build_dataset(corpus, cfg.scale, cfg.seed);

  std::vector<eval::Variant> variants;
  {
    std::string list = cfg.eval_variants;
    std::size_t pos = 0;
    while (pos <= list.size()) {
      const auto comma = list.find(',', pos);
      const std::string name =
          list.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
      if (!name.empty()) {
        const auto v = eval::variant_from_name(name);
        require(v.has_value(), errc::invalid_argument,
                "evaluate: unknown variant '" + name + "'");
        variants.push_back(*v);
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    require(!variants.empty(), errc::invalid_argument, "evaluate: no variants configured");
  }

  std::optional<model::FlowModel> flow, flow_perceptual;
  for (auto v : variants) {
    if ((v == eval::Variant::cnf || v == eval::Variant::cnf_constraint) && !flow)
      flow = load_model(cfg.checkpoint, eval::variant_name(v));
    if (v == eval::Variant::cnf_perceptual && !flow_perceptual)
      flow_perceptual = load_model(cfg.checkpoint_perceptual, eval::variant_name(v));
  }

  eval::EvalOptions opts;
  opts.tau = cfg.tau;
  opts.ensemble_n = cfg.ensemble_n;
  opts.base_seed = cfg.seed;
  opts.map_dir = out / "maps";
  opts.map_limit = cfg.map_limit;

  eval::MetricsReport report;
  for (auto v : variants) {
    const model::FlowModel* m = nullptr;
    if (v == eval::Variant::cnf || v == eval::Variant::cnf_constraint) m = &*flow;
    if (v == eval::Variant::cnf_perceptual) m = &*flow_perceptual;
    report.rows.push_back(eval::evaluate_variant(v, m, dataset.test, opts));
  }

  std::ofstream csv(out / "metrics.csv", std::ios::trunc);
  require(csv.good(), errc::io_error, "evaluate: cannot write metrics.csv");
  csv << report.to_csv();
  require(csv.good(), errc::io_error, "evaluate: write failed for metrics.csv");
  write_effective_config(cfg);
}

}  // namespace cnf::run
