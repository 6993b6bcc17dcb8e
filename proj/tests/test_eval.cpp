#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "data/grf.hpp"
#include "eval/bicubic.hpp"
#include "eval/evaluate.hpp"
#include "eval/metrics.hpp"
#include "core/rng.hpp"

using namespace cnf;

namespace {

data::GridField random_field(std::int64_t h, std::int64_t w, Rng& rng) {
  auto f = data::make_field(h, w);
  for (auto& v : f.values) v = rng.uniform();
  return f;
}

}  // namespace

TEST_CASE("catmull-rom weights are a partition of unity") {
  double w[4];
  for (int i = 0; i <= 1000; ++i) {
    eval::catmull_rom_weights(i / 1000.0, w);
    CHECK(std::abs(w[0] + w[1] + w[2] + w[3] - 1.0) < 1e-12);
  }
}

TEST_CASE("bicubic reproduces constants and linear ramps") {
  SUBCASE("constant field") {
    auto c = data::make_field(3, 3, 0.625);
    for (auto s : {2, 4}) {
      auto up = eval::bicubic_upsample(c, s);
      CHECK(up.height == 3 * s);
      CHECK(up.width == 3 * s);
      for (double v : up.values) CHECK(v == doctest::Approx(0.625).epsilon(1e-12));
    }
  }

  SUBCASE("linear ramp, interior values exactly on the ramp") {
    // Catmull-Rom reproduces linear functions; verify interior outputs
    // against a direct kernel-sum oracle and the analytic ramp.
    auto ramp = data::make_field(8, 8);
    for (std::int64_t i = 0; i < 8; ++i)
      for (std::int64_t j = 0; j < 8; ++j) ramp.at(0, i, j) = 0.25 * static_cast<double>(j);
    auto up = eval::bicubic_upsample(ramp, 2);
    for (std::int64_t i = 4; i < 12; ++i)
      for (std::int64_t j = 4; j < 12; ++j) {
        const double sj = (static_cast<double>(j) + 0.5) / 2.0 - 0.5;
        CHECK(up.at(0, i, j) == doctest::Approx(0.25 * sj).epsilon(1e-12));
      }

    // Direct 2-D kernel-sum oracle at one interior position.
    const std::int64_t oi = 7, oj = 9;
    const double si = (oi + 0.5) / 2.0 - 0.5, sj = (oj + 0.5) / 2.0 - 0.5;
    double wi[4], wj[4];
    eval::catmull_rom_weights(si - std::floor(si), wi);
    eval::catmull_rom_weights(sj - std::floor(sj), wj);
    double expect = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        expect += wi[a] * wj[b] *
                  ramp.at(0, static_cast<std::int64_t>(std::floor(si)) - 1 + a,
                          static_cast<std::int64_t>(std::floor(sj)) - 1 + b);
    CHECK(up.at(0, oi, oj) == doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("only 2x and 4x factors") {
    auto f = data::make_field(4, 4, 0.0);
    CHECK_THROWS_AS(eval::bicubic_upsample(f, 3), Error);
  }
}

TEST_CASE("mae and rmse") {
  auto a = data::make_field(2, 2, 1.0);
  auto b = data::make_field(2, 2, 1.0);
  CHECK(eval::mae(a, b) == 0.0);
  CHECK(eval::rmse(a, b) == 0.0);

  for (auto& v : b.values) v += 0.5;
  CHECK(eval::mae(a, b) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(eval::rmse(a, b) == doctest::Approx(0.5).epsilon(1e-15));

  b.values = {1.0, 1.0, 3.0, 3.0};  // errors {0,0,2,2}
  a.values = {1.0, 1.0, 1.0, 1.0};
  CHECK(eval::mae(a, b) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(eval::rmse(a, b) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  CHECK_THROWS_AS(eval::mae(a, data::make_field(3, 2, 0.0)), Error);
}

TEST_CASE("rmse dominates mae on random pairs") {
  Rng rng(71);
  for (int trial = 0; trial < 1000; ++trial) {
    auto a = random_field(6, 6, rng);
    auto b = random_field(6, 6, rng);
    CHECK(eval::rmse(a, b) >= eval::mae(a, b) - 1e-15);
  }
}

TEST_CASE("crps estimator") {
  auto truth = data::make_field(1, 1, 0.0);

  SUBCASE("one member reduces to absolute error") {
    auto m = data::make_field(1, 1, 0.7);
    const data::GridField members[] = {m};
    CHECK(eval::crps_ensemble(members, truth) == doctest::Approx(0.7).epsilon(1e-15));
  }

  SUBCASE("members {0,1} against 0 score 0.25") {
    const data::GridField members[] = {data::make_field(1, 1, 0.0), data::make_field(1, 1, 1.0)};
    CHECK(eval::crps_ensemble(members, truth) == doctest::Approx(0.25).epsilon(1e-15));
  }

  SUBCASE("a perfect ensemble scores zero") {
    const data::GridField members[] = {truth, truth, truth};
    CHECK(eval::crps_ensemble(members, truth) == doctest::Approx(0.0).epsilon(1e-15));
  }

  SUBCASE("permutation invariance and the spread bound") {
    Rng rng(73);
    auto y = random_field(4, 4, rng);
    std::vector<data::GridField> members;
    for (int i = 0; i < 5; ++i) members.push_back(random_field(4, 4, rng));
    const double crps = eval::crps_ensemble(members, y);

    double mean_abs = 0.0;
    for (const auto& m : members) mean_abs += eval::mae(m, y) / 5.0;
    CHECK(crps <= mean_abs + 1e-15);

    Rng shuffle_rng(74);
    for (int trial = 0; trial < 5; ++trial) {
      shuffle_rng.shuffle(members);
      CHECK(eval::crps_ensemble(members, y) == doctest::Approx(crps).epsilon(1e-13));
    }
  }

  SUBCASE("empty ensembles are rejected") {
    CHECK_THROWS_AS(eval::crps_ensemble({}, truth), Error);
  }
}

TEST_CASE("ensemble statistics") {
  SUBCASE("identical members have zero spread") {
    Rng rng(75);
    auto f = random_field(3, 3, rng);
    const data::GridField members[] = {f, f, f};
    auto stats = eval::ensemble_stats(members);
    CHECK(stats.mean.values == f.values);
    for (double v : stats.stddev.values) CHECK(v == 0.0);
  }

  SUBCASE("two members 0 and 2 per pixel") {
    const data::GridField members[] = {data::make_field(2, 2, 0.0), data::make_field(2, 2, 2.0)};
    auto stats = eval::ensemble_stats(members);
    for (double v : stats.mean.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
    for (double v : stats.stddev.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(stats.count == 2);
  }
}

TEST_CASE("additive constraint") {
  Rng rng(77);
  auto y = random_field(8, 8, rng);
  auto x = data::downsample_avg(random_field(8, 8, rng), 2);

  SUBCASE("already consistent input is unchanged") {
    auto consistent = data::downsample_avg(y, 2);
    auto out = eval::apply_additive_constraint(y, consistent, 2);
    for (std::size_t i = 0; i < y.values.size(); ++i)
      CHECK(out.values[i] == doctest::Approx(y.values[i]).epsilon(1e-14));
  }

  SUBCASE("output block means match the LR input exactly") {
    auto out = eval::apply_additive_constraint(y, x, 2);
    auto down = data::downsample_avg(out, 2);
    for (std::size_t i = 0; i < x.values.size(); ++i)
      CHECK(std::abs(down.values[i] - x.values[i]) < 1e-9);
  }

  SUBCASE("idempotence") {
    auto once = eval::apply_additive_constraint(y, x, 2);
    auto twice = eval::apply_additive_constraint(once, x, 2);
    for (std::size_t i = 0; i < once.values.size(); ++i)
      CHECK(twice.values[i] == doctest::Approx(once.values[i]).epsilon(1e-13));
  }

  SUBCASE("extent mismatch") {
    CHECK_THROWS_AS(eval::apply_additive_constraint(y, x, 4), Error);
  }
}

TEST_CASE("error map") {
  Rng rng(79);
  auto truth = random_field(5, 5, rng);
  auto pred = truth;
  auto zero = eval::error_map(pred, truth);
  for (double v : zero.values) CHECK(v == 0.0);

  for (auto& v : pred.values) v += 0.125;
  auto offset = eval::error_map(pred, truth);
  for (double v : offset.values) CHECK(v == doctest::Approx(0.125).epsilon(1e-14));

  // The map's mean is the MAE by definition.
  auto other = random_field(5, 5, rng);
  auto map = eval::error_map(other, truth);
  double mean = 0.0;
  for (double v : map.values) mean += v / static_cast<double>(map.values.size());
  CHECK(mean == doctest::Approx(eval::mae(other, truth)).epsilon(1e-13));
}

TEST_CASE("spearman rank correlation") {
  std::vector<double> a{1, 2, 3, 4, 5};
  std::vector<double> inc{2, 4, 9, 16, 25};
  std::vector<double> dec{5, 4, 3, 2, 1};
  CHECK(eval::spearman(a, inc) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(eval::spearman(a, dec) == doctest::Approx(-1.0).epsilon(1e-12));
  std::vector<double> flat{1, 1, 1, 1, 1};
  CHECK_THROWS_AS(eval::spearman(a, flat), Error);
}

TEST_CASE("gradient magnitude of a ramp is constant") {
  auto ramp = data::make_field(6, 6);
  for (std::int64_t i = 0; i < 6; ++i)
    for (std::int64_t j = 0; j < 6; ++j) ramp.at(0, i, j) = 0.5 * static_cast<double>(i);
  auto g = eval::gradient_magnitude(ramp);
  for (double v : g.values) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("bicubic baseline evaluation reports CRPS equal to MAE") {
  std::vector<data::PairedSample> test;
  for (int i = 0; i < 4; ++i) {
    data::PairedSample p;
    p.s = 2;
    p.y_hr = data::generate_grf(200 + static_cast<std::uint64_t>(i), 16, 16, 3.0);
    p.x_lr = data::downsample_avg(p.y_hr, 2);
    test.push_back(std::move(p));
  }
  eval::EvalOptions opts;
  auto row = eval::evaluate_variant(eval::Variant::bicubic, nullptr, test, opts);
  CHECK(row.ensemble_n == 1);
  REQUIRE(row.mae.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(row.crps[i] == doctest::Approx(row.mae[i]).epsilon(1e-15));

  eval::MetricsReport report;
  report.rows.push_back(row);
  const auto csv = report.to_csv();
  CHECK(csv.find("variant,MAE,MAE_std,RMSE,RMSE_std,CRPS,CRPS_std") == 0);
  CHECK(csv.find("bicubic,") != std::string::npos);
}
