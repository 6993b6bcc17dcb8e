#include "cnflow.h"

#include <cstring>
#include <string>

#include "data/grf.hpp"
#include "eval/bicubic.hpp"
#include "eval/metrics.hpp"
#include "run/commands.hpp"

using cnf::errc;

struct cnf_grid {
  cnf::data::GridField field;
};

struct cnf_config {
  cnf::run::RunConfig config;
};

struct cnf_model {
  cnf::model::FlowModel model;
};

namespace {

thread_local std::string g_last_error;

cnf_status status_of(errc code) {
  switch (code) {
    case errc::ok: return CNF_OK;
    case errc::invalid_argument: return CNF_ERR_INVALID_ARGUMENT;
    case errc::shape_mismatch: return CNF_ERR_SHAPE_MISMATCH;
    case errc::domain_error: return CNF_ERR_DOMAIN;
    case errc::io_error: return CNF_ERR_IO;
    case errc::bad_magic: return CNF_ERR_BAD_MAGIC;
    case errc::truncated: return CNF_ERR_TRUNCATED;
    case errc::version_mismatch: return CNF_ERR_VERSION_MISMATCH;
    case errc::diverged: return CNF_ERR_DIVERGED;
    case errc::already_exists: return CNF_ERR_EXISTS;
    case errc::unknown_key: return CNF_ERR_UNKNOWN_KEY;
    case errc::internal: return CNF_ERR_INTERNAL;
  }
  return CNF_ERR_INTERNAL;
}

template <typename Fn>
cnf_status guarded(Fn&& fn) {
  try {
    fn();
    return CNF_OK;
  } catch (const cnf::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CNF_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return CNF_ERR_INTERNAL;
  }
}

cnf_status require_arg(bool ok, const char* msg) {
  if (ok) return CNF_OK;
  g_last_error = msg;
  return CNF_ERR_INVALID_ARGUMENT;
}

cnf_grid* wrap(cnf::data::GridField field) { return new cnf_grid{std::move(field)}; }

}  // namespace

extern "C" {

const char* cnf_version(void) { return "0.1.0"; }

const char* cnf_status_name(cnf_status status) {
  switch (status) {
    case CNF_OK: return "ok";
    case CNF_ERR_INVALID_ARGUMENT: return "invalid argument";
    case CNF_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case CNF_ERR_DOMAIN: return "domain error";
    case CNF_ERR_IO: return "io error";
    case CNF_ERR_BAD_MAGIC: return "bad magic";
    case CNF_ERR_TRUNCATED: return "truncated payload";
    case CNF_ERR_VERSION_MISMATCH: return "version mismatch";
    case CNF_ERR_DIVERGED: return "diverged";
    case CNF_ERR_EXISTS: return "already exists";
    case CNF_ERR_UNKNOWN_KEY: return "unknown key";
    case CNF_ERR_INTERNAL: return "internal error";
  }
  return "?";
}

const char* cnf_last_error(void) { return g_last_error.c_str(); }

cnf_status cnf_grid_create(int64_t height, int64_t width, const double* values, double zmin,
                           double zmax, cnf_grid** out) {
  if (auto s = require_arg(values && out, "cnf_grid_create: null argument")) return s;
  return guarded([&] {
    cnf::data::GridField f = cnf::data::make_field(height, width);
    std::memcpy(f.values.data(), values, f.values.size() * sizeof(double));
    f.zmin = zmin;
    f.zmax = zmax;
    *out = wrap(std::move(f));
  });
}

void cnf_grid_free(cnf_grid* grid) { delete grid; }

int64_t cnf_grid_height(const cnf_grid* grid) { return grid ? grid->field.height : 0; }
int64_t cnf_grid_width(const cnf_grid* grid) { return grid ? grid->field.width : 0; }

const double* cnf_grid_values(const cnf_grid* grid) {
  return grid ? grid->field.values.data() : nullptr;
}

cnf_status cnf_grid_range(const cnf_grid* grid, double* zmin, double* zmax) {
  if (auto s = require_arg(grid && zmin && zmax, "cnf_grid_range: null argument")) return s;
  *zmin = grid->field.zmin;
  *zmax = grid->field.zmax;
  return CNF_OK;
}

cnf_status cnf_grid_read(const char* path, cnf_grid** out) {
  if (auto s = require_arg(path && out, "cnf_grid_read: null argument")) return s;
  return guarded([&] { *out = wrap(cnf::data::read_grid(path)); });
}

cnf_status cnf_grid_write(const cnf_grid* grid, const char* path) {
  if (auto s = require_arg(grid && path, "cnf_grid_write: null argument")) return s;
  return guarded([&] { cnf::data::write_grid(grid->field, path); });
}

cnf_status cnf_grid_write_pgm(const cnf_grid* grid, const char* path) {
  if (auto s = require_arg(grid && path, "cnf_grid_write_pgm: null argument")) return s;
  return guarded([&] { cnf::data::write_pgm(grid->field, path); });
}

cnf_status cnf_grid_generate_grf(uint64_t seed, int64_t height, int64_t width, double beta,
                                 cnf_grid** out) {
  if (auto s = require_arg(out != nullptr, "cnf_grid_generate_grf: null output")) return s;
  return guarded([&] { *out = wrap(cnf::data::generate_grf(seed, height, width, beta)); });
}

cnf_status cnf_grid_normalize(const cnf_grid* grid, double zmin, double zmax, cnf_grid** out) {
  if (auto s = require_arg(grid && out, "cnf_grid_normalize: null argument")) return s;
  return guarded([&] { *out = wrap(cnf::data::minmax_normalize(grid->field, zmin, zmax)); });
}

cnf_status cnf_grid_denormalize(const cnf_grid* grid, cnf_grid** out) {
  if (auto s = require_arg(grid && out, "cnf_grid_denormalize: null argument")) return s;
  return guarded([&] { *out = wrap(cnf::data::minmax_denormalize(grid->field)); });
}

cnf_status cnf_grid_downsample_avg(const cnf_grid* hr, int64_t s, cnf_grid** out) {
  if (auto st = require_arg(hr && out, "cnf_grid_downsample_avg: null argument")) return st;
  return guarded([&] { *out = wrap(cnf::data::downsample_avg(hr->field, s)); });
}

cnf_status cnf_grid_bicubic_upsample(const cnf_grid* lr, int64_t s, cnf_grid** out) {
  if (auto st = require_arg(lr && out, "cnf_grid_bicubic_upsample: null argument")) return st;
  return guarded([&] { *out = wrap(cnf::eval::bicubic_upsample(lr->field, s)); });
}

cnf_status cnf_grid_apply_additive_constraint(const cnf_grid* y_hr, const cnf_grid* x_lr,
                                              int64_t s, cnf_grid** out) {
  if (auto st = require_arg(y_hr && x_lr && out, "cnf_grid_apply_additive_constraint: null"))
    return st;
  return guarded(
      [&] { *out = wrap(cnf::eval::apply_additive_constraint(y_hr->field, x_lr->field, s)); });
}

cnf_status cnf_grid_error_map(const cnf_grid* prediction, const cnf_grid* truth, cnf_grid** out) {
  if (auto st = require_arg(prediction && truth && out, "cnf_grid_error_map: null argument"))
    return st;
  return guarded([&] { *out = wrap(cnf::eval::error_map(prediction->field, truth->field)); });
}

cnf_status cnf_metric_mae(const cnf_grid* a, const cnf_grid* b, double* out) {
  if (auto st = require_arg(a && b && out, "cnf_metric_mae: null argument")) return st;
  return guarded([&] { *out = cnf::eval::mae(a->field, b->field); });
}

cnf_status cnf_metric_rmse(const cnf_grid* a, const cnf_grid* b, double* out) {
  if (auto st = require_arg(a && b && out, "cnf_metric_rmse: null argument")) return st;
  return guarded([&] { *out = cnf::eval::rmse(a->field, b->field); });
}

cnf_status cnf_metric_crps(const cnf_grid* const* members, int64_t count, const cnf_grid* truth,
                           double* out) {
  if (auto st = require_arg(members && truth && out && count >= 1,
                            "cnf_metric_crps: need members, truth, and output"))
    return st;
  return guarded([&] {
    std::vector<cnf::data::GridField> fields;
    fields.reserve(static_cast<std::size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
      cnf::require(members[i] != nullptr, errc::invalid_argument,
                   "cnf_metric_crps: null member");
      fields.push_back(members[i]->field);
    }
    *out = cnf::eval::crps_ensemble(fields, truth->field);
  });
}

cnf_status cnf_ensemble_stats(const cnf_grid* const* members, int64_t count, cnf_grid** mean,
                              cnf_grid** stddev) {
  if (auto st = require_arg(members && mean && stddev && count >= 1,
                            "cnf_ensemble_stats: need members and outputs"))
    return st;
  return guarded([&] {
    std::vector<cnf::data::GridField> fields;
    fields.reserve(static_cast<std::size_t>(count));
    for (int64_t i = 0; i < count; ++i) {
      cnf::require(members[i] != nullptr, errc::invalid_argument,
                   "cnf_ensemble_stats: null member");
      fields.push_back(members[i]->field);
    }
    auto stats = cnf::eval::ensemble_stats(fields);
    *mean = wrap(std::move(stats.mean));
    *stddev = wrap(std::move(stats.stddev));
  });
}

cnf_status cnf_config_create(cnf_config** out) {
  if (auto st = require_arg(out != nullptr, "cnf_config_create: null output")) return st;
  *out = new cnf_config{};
  return CNF_OK;
}

void cnf_config_free(cnf_config* config) { delete config; }

cnf_status cnf_config_set(cnf_config* config, const char* key, const char* value) {
  if (auto st = require_arg(config && key && value, "cnf_config_set: null argument")) return st;
  return guarded([&] { config->config.set(key, value); });
}

cnf_status cnf_config_get(const cnf_config* config, const char* key, char* buffer,
                          size_t buffer_size) {
  if (auto st = require_arg(config && key && buffer && buffer_size > 0,
                            "cnf_config_get: null argument"))
    return st;
  return guarded([&] {
    const std::string v = config->config.get(key);
    cnf::require(v.size() + 1 <= buffer_size, errc::invalid_argument,
                 "cnf_config_get: buffer too small");
    std::memcpy(buffer, v.c_str(), v.size() + 1);
  });
}

cnf_status cnf_config_load(cnf_config* config, const char* path) {
  if (auto st = require_arg(config && path, "cnf_config_load: null argument")) return st;
  return guarded([&] { config->config.load_file(path); });
}

cnf_status cnf_config_save(const cnf_config* config, const char* path) {
  if (auto st = require_arg(config && path, "cnf_config_save: null argument")) return st;
  return guarded([&] { config->config.save_file(path); });
}

cnf_status cnf_model_create(const cnf_config* config, cnf_model** out) {
  if (auto st = require_arg(config && out, "cnf_model_create: null argument")) return st;
  return guarded([&] {
    *out = new cnf_model{
        cnf::model::FlowModel(config->config.model_config(), config->config.seed)};
  });
}

void cnf_model_free(cnf_model* model) { delete model; }

cnf_status cnf_model_load(const char* path, cnf_model** out) {
  if (auto st = require_arg(path && out, "cnf_model_load: null argument")) return st;
  return guarded([&] { *out = new cnf_model{cnf::model::FlowModel::load(path).model}; });
}

cnf_status cnf_model_save(const cnf_model* model, const char* path) {
  if (auto st = require_arg(model && path, "cnf_model_save: null argument")) return st;
  return guarded([&] { model->model.save(path); });
}

cnf_status cnf_model_nll(const cnf_model* model, const cnf_grid* y_hr, const cnf_grid* x_lr,
                         double* bits_per_dim) {
  if (auto st = require_arg(model && y_hr && x_lr && bits_per_dim, "cnf_model_nll: null argument"))
    return st;
  return guarded([&] { *bits_per_dim = model->model.nll(y_hr->field, x_lr->field); });
}

cnf_status cnf_model_sample(const cnf_model* model, const cnf_grid* x_lr, double tau,
                            uint64_t seed, cnf_grid** out) {
  if (auto st = require_arg(model && x_lr && out, "cnf_model_sample: null argument")) return st;
  return guarded([&] { *out = wrap(model->model.sample(x_lr->field, tau, seed)); });
}

cnf_status cnf_run_generate(const cnf_config* config, int force) {
  if (auto st = require_arg(config != nullptr, "cnf_run_generate: null config")) return st;
  return guarded([&] { cnf::run::run_generate(config->config, force != 0); });
}

cnf_status cnf_run_train(const cnf_config* config) {
  if (auto st = require_arg(config != nullptr, "cnf_run_train: null config")) return st;
  return guarded([&] { cnf::run::run_train(config->config); });
}

cnf_status cnf_run_sample(const cnf_config* config) {
  if (auto st = require_arg(config != nullptr, "cnf_run_sample: null config")) return st;
  return guarded([&] { cnf::run::run_sample(config->config); });
}

cnf_status cnf_run_evaluate(const cnf_config* config) {
  if (auto st = require_arg(config != nullptr, "cnf_run_evaluate: null config")) return st;
  return guarded([&] { cnf::run::run_evaluate(config->config); });
}

}  // extern "C"
