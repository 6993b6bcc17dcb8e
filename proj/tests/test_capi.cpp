#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "cnflow.h"

namespace fs = std::filesystem;

namespace {

fs::path work_dir() {
  auto p = fs::temp_directory_path() / "cnflow_capi_test";
  fs::create_directories(p);
  return p;
}

struct Grid {
  cnf_grid* g = nullptr;
  ~Grid() { cnf_grid_free(g); }
};

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(cnf_version()) == "0.1.0");
  CHECK(std::string(cnf_status_name(CNF_OK)) == "ok");
  CHECK(std::string(cnf_status_name(CNF_ERR_BAD_MAGIC)) == "bad magic");
}

TEST_CASE("grid lifecycle and io") {
  const double values[] = {0.0, 0.25, 0.5, 0.75, 1.0, 0.125};
  Grid g;
  REQUIRE(cnf_grid_create(2, 3, values, -1.0, 3.0, &g.g) == CNF_OK);
  CHECK(cnf_grid_height(g.g) == 2);
  CHECK(cnf_grid_width(g.g) == 3);
  CHECK(std::memcmp(cnf_grid_values(g.g), values, sizeof values) == 0);
  double zmin = 0, zmax = 0;
  REQUIRE(cnf_grid_range(g.g, &zmin, &zmax) == CNF_OK);
  CHECK(zmin == -1.0);
  CHECK(zmax == 3.0);

  const auto path = (work_dir() / "grid.cnfg").string();
  REQUIRE(cnf_grid_write(g.g, path.c_str()) == CNF_OK);
  Grid back;
  REQUIRE(cnf_grid_read(path.c_str(), &back.g) == CNF_OK);
  CHECK(std::memcmp(cnf_grid_values(back.g), values, sizeof values) == 0);

  Grid missing;
  CHECK(cnf_grid_read((work_dir() / "nope.cnfg").string().c_str(), &missing.g) == CNF_ERR_IO);
  CHECK(std::string(cnf_last_error()).find("nope.cnfg") != std::string::npos);

  const auto junk = (work_dir() / "junk.cnfg").string();
  {
    FILE* f = fopen(junk.c_str(), "wb");
    fwrite("garbage.....................", 1, 28, f);
    fclose(f);
  }
  CHECK(cnf_grid_read(junk.c_str(), &missing.g) == CNF_ERR_BAD_MAGIC);

  CHECK(cnf_grid_create(2, 3, nullptr, 0, 1, &g.g) == CNF_ERR_INVALID_ARGUMENT);
}

TEST_CASE("grf, downsample, bicubic, constraint, metrics") {
  Grid hr;
  REQUIRE(cnf_grid_generate_grf(11, 16, 16, 3.0, &hr.g) == CNF_OK);

  Grid lr;
  REQUIRE(cnf_grid_downsample_avg(hr.g, 2, &lr.g) == CNF_OK);
  CHECK(cnf_grid_height(lr.g) == 8);

  Grid up;
  REQUIRE(cnf_grid_bicubic_upsample(lr.g, 2, &up.g) == CNF_OK);
  CHECK(cnf_grid_height(up.g) == 16);

  Grid constrained;
  REQUIRE(cnf_grid_apply_additive_constraint(up.g, lr.g, 2, &constrained.g) == CNF_OK);
  Grid check_lr;
  REQUIRE(cnf_grid_downsample_avg(constrained.g, 2, &check_lr.g) == CNF_OK);
  const double* a = cnf_grid_values(check_lr.g);
  const double* b = cnf_grid_values(lr.g);
  for (int i = 0; i < 64; ++i) CHECK(std::abs(a[i] - b[i]) < 1e-9);

  double mae = 0, rmse = 0;
  REQUIRE(cnf_metric_mae(up.g, hr.g, &mae) == CNF_OK);
  REQUIRE(cnf_metric_rmse(up.g, hr.g, &rmse) == CNF_OK);
  CHECK(rmse >= mae);

  const cnf_grid* members[2] = {up.g, constrained.g};
  double crps = 0;
  REQUIRE(cnf_metric_crps(members, 2, hr.g, &crps) == CNF_OK);
  CHECK(crps >= 0.0);

  cnf_grid *mean = nullptr, *stddev = nullptr;
  REQUIRE(cnf_ensemble_stats(members, 2, &mean, &stddev) == CNF_OK);
  CHECK(cnf_grid_height(mean) == 16);
  cnf_grid_free(mean);
  cnf_grid_free(stddev);

  Grid err;
  REQUIRE(cnf_grid_error_map(up.g, hr.g, &err.g) == CNF_OK);

  Grid bad;
  CHECK(cnf_grid_downsample_avg(hr.g, 3, &bad.g) == CNF_ERR_SHAPE_MISMATCH);
}

TEST_CASE("normalization through the C surface") {
  const double values[] = {-1.0, 0.0, 1.0, 3.0};
  Grid g;
  REQUIRE(cnf_grid_create(2, 2, values, 0, 1, &g.g) == CNF_OK);
  Grid n;
  REQUIRE(cnf_grid_normalize(g.g, -1.0, 3.0, &n.g) == CNF_OK);
  CHECK(cnf_grid_values(n.g)[0] == 0.0);
  CHECK(cnf_grid_values(n.g)[3] == 1.0);
  Grid back;
  REQUIRE(cnf_grid_denormalize(n.g, &back.g) == CNF_OK);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(cnf_grid_values(back.g)[i] - values[i]) < 1e-12);

  Grid bad;
  CHECK(cnf_grid_normalize(g.g, 2.0, 2.0, &bad.g) == CNF_ERR_DOMAIN);
}

TEST_CASE("config surface") {
  cnf_config* cfg = nullptr;
  REQUIRE(cnf_config_create(&cfg) == CNF_OK);

  char buf[64];
  REQUIRE(cnf_config_get(cfg, "tau", buf, sizeof buf) == CNF_OK);
  CHECK(std::string(buf) == "0.80000000000000004");  // %.17g of 0.8

  REQUIRE(cnf_config_set(cfg, "epochs", "3") == CNF_OK);
  REQUIRE(cnf_config_get(cfg, "epochs", buf, sizeof buf) == CNF_OK);
  CHECK(std::string(buf) == "3");

  CHECK(cnf_config_set(cfg, "not_a_key", "1") == CNF_ERR_UNKNOWN_KEY);
  CHECK(cnf_config_get(cfg, "tau", buf, 2) == CNF_ERR_INVALID_ARGUMENT);

  const auto path = (work_dir() / "config.txt").string();
  REQUIRE(cnf_config_save(cfg, path.c_str()) == CNF_OK);
  cnf_config* loaded = nullptr;
  REQUIRE(cnf_config_create(&loaded) == CNF_OK);
  REQUIRE(cnf_config_load(loaded, path.c_str()) == CNF_OK);
  REQUIRE(cnf_config_get(loaded, "epochs", buf, sizeof buf) == CNF_OK);
  CHECK(std::string(buf) == "3");

  cnf_config_free(loaded);
  cnf_config_free(cfg);
}

TEST_CASE("model lifecycle through the C surface") {
  cnf_config* cfg = nullptr;
  REQUIRE(cnf_config_create(&cfg) == CNF_OK);
  for (auto [k, v] : std::initializer_list<std::pair<const char*, const char*>>{
           {"num_scales", "2"}, {"hidden_channels", "8"}, {"cond_channels", "8"}, {"seed", "5"}})
    REQUIRE(cnf_config_set(cfg, k, v) == CNF_OK);

  cnf_model* model = nullptr;
  REQUIRE(cnf_model_create(cfg, &model) == CNF_OK);

  Grid hr, lr;
  REQUIRE(cnf_grid_generate_grf(21, 16, 16, 3.0, &hr.g) == CNF_OK);
  REQUIRE(cnf_grid_downsample_avg(hr.g, 2, &lr.g) == CNF_OK);

  double bpd = 0;
  REQUIRE(cnf_model_nll(model, hr.g, lr.g, &bpd) == CNF_OK);
  CHECK(std::isfinite(bpd));

  const auto path = (work_dir() / "model.cnfm").string();
  REQUIRE(cnf_model_save(model, path.c_str()) == CNF_OK);
  cnf_model* loaded = nullptr;
  REQUIRE(cnf_model_load(path.c_str(), &loaded) == CNF_OK);

  Grid sample_a, sample_b;
  REQUIRE(cnf_model_sample(loaded, lr.g, 0.8, 123, &sample_a.g) == CNF_OK);
  REQUIRE(cnf_model_sample(loaded, lr.g, 0.8, 123, &sample_b.g) == CNF_OK);
  CHECK(std::memcmp(cnf_grid_values(sample_a.g), cnf_grid_values(sample_b.g),
                    sizeof(double) * 16 * 16) == 0);
  CHECK(cnf_grid_height(sample_a.g) == 16);  // 2 × the 8×8 input

  Grid bad;
  CHECK(cnf_model_sample(loaded, lr.g, -1.0, 1, &bad.g) == CNF_ERR_INVALID_ARGUMENT);

  cnf_model_free(loaded);
  cnf_model_free(model);
  cnf_config_free(cfg);
}

TEST_CASE("run commands through the C surface") {
  const auto out = work_dir() / "gen";
  fs::remove_all(out);
  cnf_config* cfg = nullptr;
  REQUIRE(cnf_config_create(&cfg) == CNF_OK);
  REQUIRE(cnf_config_set(cfg, "out_dir", out.string().c_str()) == CNF_OK);
  REQUIRE(cnf_config_set(cfg, "corpus_size", "4") == CNF_OK);
  REQUIRE(cnf_config_set(cfg, "hr_height", "16") == CNF_OK);
  REQUIRE(cnf_config_set(cfg, "hr_width", "16") == CNF_OK);

  REQUIRE(cnf_run_generate(cfg, 0) == CNF_OK);
  CHECK(fs::exists(out / "manifest.txt"));
  CHECK(cnf_run_generate(cfg, 0) == CNF_ERR_EXISTS);
  CHECK(cnf_run_generate(cfg, 1) == CNF_OK);

  cnf_config_free(cfg);
}
