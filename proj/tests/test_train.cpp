#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "data/grf.hpp"
#include "train/trainer.hpp"
#include "testutil.hpp"

using namespace cnf;
namespace fs = std::filesystem;

namespace {

// Scalar reference recurrence for Adam, kept deliberately separate from the
// production implementation.
struct ScalarAdamRef {
  double m = 0.0, v = 0.0;
  std::int64_t t = 0;
  double beta1, beta2, eps;

  double update(double theta, double g, double lr) {
    ++t;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g * g;
    const double mhat = m / (1.0 - std::pow(beta1, static_cast<double>(t)));
    const double vhat = v / (1.0 - std::pow(beta2, static_cast<double>(t)));
    return theta - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

data::Dataset tiny_dataset(std::size_t count, std::int64_t hw, std::uint64_t seed) {
  std::vector<data::GridField> corpus;
  for (std::size_t i = 0; i < count; ++i)
    corpus.push_back(data::generate_grf(seed + i, hw, hw, 3.0));
  return data::build_dataset(corpus, 2, seed);
}

model::ModelConfig tiny_model_config() {
  model::ModelConfig cfg;
  cfg.scale_factor = 2;
  cfg.num_scales = 1;
  cfg.steps_per_scale = 1;
  cfg.hidden_channels = 4;
  cfg.cond_channels = 2;
  return cfg;
}

train::TrainConfig fast_train_config() {
  train::TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.ema_decay = 0.9;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("train config validation") {
  train::TrainConfig cfg;
  cfg.decay = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = train::TrainConfig{};
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = train::TrainConfig{};
  cfg.perceptual_weight = -0.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("learning-rate schedule hits the published constants") {
  train::TrainConfig cfg;  // lr0 2e-4, decay 0.5 every 200k steps
  CHECK(train::lr_at(cfg, 0) == doctest::Approx(2e-4).epsilon(1e-15));
  CHECK(train::lr_at(cfg, 199999) == doctest::Approx(2e-4).epsilon(1e-15));
  CHECK(train::lr_at(cfg, 200000) == doctest::Approx(1e-4).epsilon(1e-15));
  CHECK(train::lr_at(cfg, 399999) == doctest::Approx(1e-4).epsilon(1e-15));
  CHECK(train::lr_at(cfg, 400000) == doctest::Approx(5e-5).epsilon(1e-15));
  CHECK_THROWS_AS(train::lr_at(cfg, -1), Error);

  // Monotone non-increasing.
  double prev = train::lr_at(cfg, 0);
  for (std::int64_t step = 1; step < 1000000; step += 7919) {
    const double lr = train::lr_at(cfg, step);
    CHECK(lr <= prev + 1e-18);
    prev = lr;
  }
}

TEST_CASE("adam basics") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    auto p = ad::make_tensor({2}, {1.5, -0.5}, true);
    train::Adam adam({p}, 0.9, 0.99, 1e-8);
    adam.step(0.1);
    CHECK(p->value == std::vector<double>{1.5, -0.5});
  }

  SUBCASE("first update magnitude is about lr") {
    // f(θ)=θ², θ0=1: bias correction makes m̂/√v̂ the gradient sign.
    auto p = ad::make_tensor({1}, {1.0}, true);
    train::Adam adam({p}, 0.9, 0.99, 1e-8);
    p->grad[0] = 2.0;  // df/dθ at 1
    adam.step(0.01);
    CHECK(p->value[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
  }

  SUBCASE("200 steps on (θ-3)² converge near 3") {
    auto p = ad::make_tensor({1}, {0.0}, true);
    train::Adam adam({p}, 0.9, 0.99, 1e-8);
    for (int i = 0; i < 200; ++i) {
      p->grad[0] = 2.0 * (p->value[0] - 3.0);
      adam.step(0.1);
      p->zero_grad();
    }
    CHECK(std::abs(p->value[0] - 3.0) < 0.1);
  }

  SUBCASE("matches the scalar reference recurrence to 1e-12") {
    auto p = ad::make_tensor({1}, {0.2}, true);
    train::Adam adam({p}, 0.9, 0.99, 1e-8);
    ScalarAdamRef ref{0, 0, 0, 0.9, 0.99, 1e-8};
    double theta = 0.2;
    Rng rng(17);
    for (int i = 0; i < 100; ++i) {
      const double g = rng.gaussian();
      p->grad[0] = g;
      adam.step(2e-4);
      theta = ref.update(theta, g, 2e-4);
      p->zero_grad();
      CHECK(std::abs(p->value[0] - theta) < 1e-12);
    }
  }

  SUBCASE("non-finite gradients abort the step") {
    auto p = ad::make_tensor({1}, {1.0}, true);
    train::Adam adam({p}, 0.9, 0.99, 1e-8);
    p->grad[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam.step(0.1), Error);
    CHECK(p->value[0] == 1.0);
  }
}

TEST_CASE("ema recurrence") {
  auto p = ad::make_tensor({1}, {1.0}, true);

  SUBCASE("decay 0 copies the parameters") {
    train::Ema ema({p});
    p->value[0] = 7.0;
    ema.update(0.0);
    CHECK(ema.shadow()[0][0] == 7.0);
  }

  SUBCASE("decay 1 never moves") {
    train::Ema ema({p});
    p->value[0] = 7.0;
    ema.update(1.0);
    CHECK(ema.shadow()[0][0] == 1.0);
  }

  SUBCASE("two updates at decay 0.9 from shadow 0") {
    p->value[0] = 0.0;
    train::Ema ema({p});  // shadow = 0
    p->value[0] = 1.0;
    ema.update(0.9);  // 0.1
    ema.update(0.9);  // 0.19
    CHECK(ema.shadow()[0][0] == doctest::Approx(0.19).epsilon(1e-12));
  }
}

TEST_CASE("gradient clipping") {
  auto p = ad::make_tensor({2}, {0.0, 0.0}, true);
  p->grad = {30.0, 40.0};  // norm 50
  const double norm = train::clip_grad_norm({p}, 5.0);
  CHECK(norm == doctest::Approx(50.0));
  CHECK(p->grad[0] == doctest::Approx(3.0));
  CHECK(p->grad[1] == doctest::Approx(4.0));
}

TEST_CASE("batch loss reductions") {
  auto ds = tiny_dataset(12, 8, 23);
  model::FlowModel m(tiny_model_config(), 23);
  m.mark_actnorm_initialized();
  std::span<const data::PairedSample> batch(ds.train.data(), 4);

  SUBCASE("λ = 0 is the mean nll") {
    ad::Graph g(false);
    auto loss = train::batch_loss(g, m, batch, 0.0, 0.8, 7);
    double mean = 0.0;
    for (const auto& p : batch) mean += m.nll(p.y_hr, p.x_lr) / 4.0;
    CHECK(loss->value[0] == doctest::Approx(mean).epsilon(1e-12));
  }

  SUBCASE("constant offset adds exactly δ² at λ = 1") {
    // Make the truth equal the τ-sample plus δ; the MSE term must be δ².
    const double delta = 0.25;
    auto pair = ds.train[0];
    auto sampled = m.sample(pair.x_lr, 0.8, 7);  // seed used for member 0
    data::PairedSample shifted = pair;
    shifted.y_hr = sampled;
    for (auto& v : shifted.y_hr.values) v += delta;
    std::span<const data::PairedSample> one(&shifted, 1);

    ad::Graph g0(false), g1(false);
    const double base = train::batch_loss(g0, m, one, 0.0, 0.8, 7)->value[0];
    const double with_mse = train::batch_loss(g1, m, one, 1.0, 0.8, 7)->value[0];
    CHECK(with_mse - base == doctest::Approx(delta * delta).epsilon(1e-9));
  }

  SUBCASE("perfect prediction adds nothing") {
    auto pair = ds.train[0];
    data::PairedSample exact = pair;
    exact.y_hr = m.sample(pair.x_lr, 0.8, 7);
    std::span<const data::PairedSample> one(&exact, 1);
    ad::Graph g0(false), g1(false);
    const double base = train::batch_loss(g0, m, one, 0.0, 0.8, 7)->value[0];
    const double with_mse = train::batch_loss(g1, m, one, 1.0, 0.8, 7)->value[0];
    CHECK(with_mse == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("fit is deterministic and learns") {
  auto ds = tiny_dataset(24, 8, 31);
  auto tcfg = fast_train_config();
  tcfg.epochs = 4;

  model::FlowModel m1(tiny_model_config(), 31);
  auto r1 = train::fit(m1, ds, tcfg);
  REQUIRE(r1.log.size() == 4);
  CHECK(r1.log.back().train_bpd < r1.log.front().train_bpd);
  CHECK(r1.log.back().val_bpd < r1.log.front().val_bpd);

  model::FlowModel m2(tiny_model_config(), 31);
  auto r2 = train::fit(m2, ds, tcfg);

  // Bitwise-identical trajectories and final parameters.
  REQUIRE(r1.step_losses.size() == r2.step_losses.size());
  for (std::size_t i = 0; i < r1.step_losses.size(); ++i)
    CHECK(r1.step_losses[i] == r2.step_losses[i]);
  auto p1 = m1.parameters(), p2 = m2.parameters();
  for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p1[i]->value == p2[i]->value);
  for (std::size_t i = 0; i < r1.ema_shadow.size(); ++i)
    CHECK(r1.ema_shadow[i] == r2.ema_shadow[i]);
}

TEST_CASE("fit with zero epochs changes nothing") {
  auto ds = tiny_dataset(12, 8, 37);
  model::FlowModel m(tiny_model_config(), 37);
  auto before = m.parameters();
  std::vector<std::vector<double>> snapshot;
  for (const auto& p : before) snapshot.push_back(p->value);

  auto cfg = fast_train_config();
  cfg.epochs = 0;
  auto r = train::fit(m, ds, cfg);
  CHECK(r.log.empty());
  CHECK(r.step_losses.empty());
  auto after = m.parameters();
  for (std::size_t i = 0; i < after.size(); ++i) CHECK(after[i]->value == snapshot[i]);
}

TEST_CASE("initial bits/dim matches the closed-form Gaussian value") {
  // λ = 0, identity-initialized model (no data init): the first loss is the
  // standard-normal bits/dim of the jittered data, (½·mean(y²) + ½ln 2π)/ln 2.
  auto ds = tiny_dataset(12, 8, 41);
  model::FlowModel m(tiny_model_config(), 41);

  auto cfg = fast_train_config();
  cfg.actnorm_data_init = false;
  cfg.epochs = 1;
  cfg.batch_size = static_cast<std::int64_t>(ds.train.size());
  auto r = train::fit(m, ds, cfg);

  // Closed form from the raw (un-jittered) data; the jitter shifts the value
  // by far less than the 0.05 bits/dim tolerance.
  double sum_sq = 0.0;
  std::size_t count = 0;
  for (const auto& p : ds.train) {
    for (double v : p.y_hr.values) sum_sq += v * v;
    count += p.y_hr.values.size();
  }
  const double expect =
      (0.5 * sum_sq / static_cast<double>(count) + 0.5 * std::log(2.0 * std::numbers::pi)) /
      std::numbers::ln2;
  CHECK(r.log[0].train_bpd == doctest::Approx(expect).epsilon(0.05 / expect));
}

TEST_CASE("resume reproduces the uninterrupted next-step loss") {
  const auto dir = fs::temp_directory_path() / "cnflow_train_test";
  fs::remove_all(dir);
  fs::create_directories(dir);

  auto ds = tiny_dataset(24, 8, 43);
  auto cfg = fast_train_config();
  cfg.epochs = 2;

  model::FlowModel full(tiny_model_config(), 43);
  auto r_full = train::fit(full, ds, cfg, dir / "full");

  // Stop after epoch 0, reload, resume into epoch 1.
  auto cfg1 = cfg;
  cfg1.epochs = 1;
  model::FlowModel part(tiny_model_config(), 43);
  auto r_part = train::fit(part, ds, cfg1, dir / "part");

  auto loaded = model::FlowModel::load(dir / "part" / "checkpoints" / "epoch_0000.cnfm");
  auto r_resumed = train::fit(loaded.model, ds, cfg, {}, /*resume_epoch=*/1);

  const std::size_t steps_per_epoch = r_part.step_losses.size();
  REQUIRE(r_full.step_losses.size() == 2 * steps_per_epoch);
  REQUIRE(!r_resumed.step_losses.empty());
  CHECK(r_resumed.step_losses[0] == doctest::Approx(r_full.step_losses[steps_per_epoch]).epsilon(1e-12));
}

TEST_CASE("training log file format") {
  const auto dir = fs::temp_directory_path() / "cnflow_train_log";
  fs::remove_all(dir);
  auto ds = tiny_dataset(12, 8, 47);
  model::FlowModel m(tiny_model_config(), 47);
  auto cfg = fast_train_config();
  cfg.epochs = 2;
  train::fit(m, ds, cfg, dir);

  std::ifstream log(dir / "train_log.txt");
  REQUIRE(log.good());
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    ++lines;
    CHECK(std::count(line.begin(), line.end(), ',') == 4);  // epoch,step,lr,train,val
  }
  CHECK(lines == 2);
  CHECK(fs::exists(dir / "checkpoints" / "epoch_0000.cnfm"));
  CHECK(fs::exists(dir / "checkpoints" / "epoch_0001.cnfm"));
}

TEST_CASE("divergence aborts with a diverged error") {
  auto ds = tiny_dataset(12, 8, 53);
  model::FlowModel m(tiny_model_config(), 53);
  // Break the model so the likelihood is non-finite immediately.
  m.parameters()[0]->value[0] = std::numeric_limits<double>::infinity();
  auto cfg = fast_train_config();
  cfg.epochs = 1;
  try {
    train::fit(m, ds, cfg);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == errc::diverged);
  }
}

TEST_CASE("perceptual term trains end to end") {
  auto ds = tiny_dataset(12, 8, 59);
  model::FlowModel m(tiny_model_config(), 59);
  auto cfg = fast_train_config();
  cfg.epochs = 1;
  cfg.perceptual_weight = 0.05;
  auto r = train::fit(m, ds, cfg);
  CHECK(!r.step_losses.empty());
  for (double v : r.step_losses) CHECK(std::isfinite(v));
}
