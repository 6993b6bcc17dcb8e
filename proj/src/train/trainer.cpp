#include "train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "core/rng.hpp"

namespace cnf::train {

namespace {

ad::TensorPtr jittered_target(const data::GridField& y, double amplitude, Rng& rng) {
  auto t = model::tensor_from_field(y);
  if (amplitude > 0.0)
    for (auto& v : t->value) v += amplitude * rng.gaussian();
  return t;
}

std::string log_line(const EpochStats& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld,%lld,%.10g,%.10g,%.10g",
                static_cast<long long>(s.epoch), static_cast<long long>(s.step), s.lr,
                s.train_bpd, s.val_bpd);
  return buf;
}

}  // namespace

ad::TensorPtr batch_loss(ad::Graph& g, const model::FlowModel& model,
                         std::span<const data::PairedSample> batch, double lambda, double tau,
                         std::uint64_t sample_seed) {
  require(!batch.empty(), errc::invalid_argument, "batch_loss: empty batch");
  require(lambda >= 0.0, errc::invalid_argument, "batch_loss: λ must be >= 0");
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  ad::TensorPtr loss;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto y = model::tensor_from_field(batch[i].y_hr);
    auto x = model::tensor_from_field(batch[i].x_lr);
    auto term = g.mul(model.nll_graph(g, y, x), inv_n);
    if (lambda > 0.0) {
      auto y_hat = model.sample_graph(g, x, tau, sample_seed + i);
      auto diff = g.sub(y_hat, y);
      term = g.add(term, g.mul(g.mean_all(g.mul(diff, diff)), lambda * inv_n));
    }
    loss = loss ? g.add(loss, term) : term;
  }
  require(std::isfinite(loss->value[0]), errc::diverged, "batch_loss: non-finite loss");
  return loss;
}

FitResult fit(model::FlowModel& model, const data::Dataset& dataset, const TrainConfig& cfg,
              const std::filesystem::path& out_dir, std::int64_t resume_epoch) {
  cfg.validate();
  require(!dataset.train.empty(), errc::invalid_argument, "fit: empty training split");
  require(resume_epoch >= 0 && resume_epoch <= cfg.epochs, errc::invalid_argument,
          "fit: resume epoch out of range");

  const auto n_train = static_cast<std::int64_t>(dataset.train.size());
  const std::int64_t steps_per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;

  std::ofstream log_file;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir / "checkpoints");
    log_file.open(out_dir / "train_log.txt", resume_epoch > 0 ? std::ios::app : std::ios::trunc);
    require(log_file.good(), errc::io_error, "fit: cannot open training log");
  }

  // Data-dependent actnorm init from the first batch the loop would see.
  if (cfg.actnorm_data_init && cfg.epochs > 0 && resume_epoch == 0 &&
      !model.actnorm_initialized()) {
    std::vector<std::size_t> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(cfg.seed, 0xe90c, 0));
    rng.shuffle(order);
    std::vector<data::GridField> first_batch;
    for (std::int64_t i = 0; i < std::min(cfg.batch_size, n_train); ++i)
      first_batch.push_back(dataset.train[order[static_cast<std::size_t>(i)]].y_hr);
    model.init_actnorm(first_batch);
  }

  auto params = model.parameters();
  Adam adam(params, cfg.beta1, cfg.beta2, cfg.eps);
  Ema ema(params);

  FitResult result;
  std::int64_t global_step = resume_epoch * steps_per_epoch;

  for (std::int64_t epoch = resume_epoch; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(static_cast<std::size_t>(n_train));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(mix_seed(cfg.seed, 0xe90c, static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_bpd = 0.0;
    for (std::int64_t start = 0; start < n_train; start += cfg.batch_size) {
      const std::int64_t count = std::min(cfg.batch_size, n_train - start);
      const double inv_n = 1.0 / static_cast<double>(count);
      adam.zero_grad();
      double step_loss = 0.0;
      for (std::int64_t i = 0; i < count; ++i) {
        const auto idx = order[static_cast<std::size_t>(start + i)];
        const auto& pair = dataset.train[idx];
        Rng jitter_rng(mix_seed(cfg.seed ^ 0x9d2c5680u, static_cast<std::uint64_t>(epoch), idx));
        ad::Graph g;
        auto y = jittered_target(pair.y_hr, cfg.jitter, jitter_rng);
        auto x = model::tensor_from_field(pair.x_lr);
        auto bpd = model.nll_graph(g, y, x);
        epoch_bpd += bpd->value[0];
        auto loss = g.mul(bpd, inv_n);
        if (cfg.perceptual_weight > 0.0) {
          const std::uint64_t batch_seed =
              mix_seed(cfg.seed ^ 0xabcd1234u, static_cast<std::uint64_t>(global_step));
          auto y_clean = model::tensor_from_field(pair.y_hr);
          auto y_hat =
              model.sample_graph(g, x, cfg.perceptual_tau, batch_seed + static_cast<std::uint64_t>(i));
          auto diff = g.sub(y_hat, y_clean);
          loss = g.add(loss, g.mul(g.mean_all(g.mul(diff, diff)),
                                   cfg.perceptual_weight * inv_n));
        }
        require(std::isfinite(loss->value[0]), errc::diverged,
                "fit: non-finite loss at epoch " + std::to_string(epoch));
        step_loss += loss->value[0];
        g.backward(loss);
      }
      clip_grad_norm(params, cfg.grad_clip);
      adam.step(lr_at(cfg, global_step));
      ema.update(cfg.ema_decay);
      ++global_step;
      result.step_losses.push_back(step_loss);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.step = global_step;
    stats.lr = lr_at(cfg, global_step > 0 ? global_step - 1 : 0);
    stats.train_bpd = epoch_bpd / static_cast<double>(n_train);
    stats.val_bpd = std::numeric_limits<double>::quiet_NaN();
    if (!dataset.val.empty()) {
      ema.swap_with_params();
      double v = 0.0;
      for (const auto& pair : dataset.val) v += model.nll(pair.y_hr, pair.x_lr);
      ema.swap_with_params();
      stats.val_bpd = v / static_cast<double>(dataset.val.size());
    }
    result.log.push_back(stats);
    if (!out_dir.empty()) {
      log_file << log_line(stats) << "\n";
      log_file.flush();
      char name[48];
      std::snprintf(name, sizeof name, "epoch_%04lld.cnfm", static_cast<long long>(epoch));
      model.save(out_dir / "checkpoints" / name, &ema.shadow());
    }
  }

  result.ema_shadow = ema.shadow();
  return result;
}

}  // namespace cnf::train
