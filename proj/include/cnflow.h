/* cnflow — conditional normalizing flows for statistical downscaling of
 * gridded scalar fields. C API over the C++ core: opaque handles, status
 * codes, and a thread-local detail message for the last failure.
 */
#ifndef CNFLOW_H
#define CNFLOW_H

#include <stdint.h>
#include <stddef.h>

#if defined(_WIN32)
#define CNF_API __declspec(dllexport)
#else
#define CNF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cnf_status {
  CNF_OK = 0,
  CNF_ERR_INVALID_ARGUMENT = 1,
  CNF_ERR_SHAPE_MISMATCH = 2,
  CNF_ERR_DOMAIN = 3,
  CNF_ERR_IO = 4,
  CNF_ERR_BAD_MAGIC = 5,
  CNF_ERR_TRUNCATED = 6,
  CNF_ERR_VERSION_MISMATCH = 7,
  CNF_ERR_DIVERGED = 8,
  CNF_ERR_EXISTS = 9,
  CNF_ERR_UNKNOWN_KEY = 10,
  CNF_ERR_INTERNAL = 11
} cnf_status;

CNF_API const char* cnf_version(void);
CNF_API const char* cnf_status_name(cnf_status status);
/* Detail message for the most recent failing call on this thread. */
CNF_API const char* cnf_last_error(void);

/* ---- grids ------------------------------------------------------------ */

typedef struct cnf_grid cnf_grid;

/* values: row-major height×width doubles; (zmin, zmax) is the source value
 * range carried as metadata. */
CNF_API cnf_status cnf_grid_create(int64_t height, int64_t width, const double* values,
                                   double zmin, double zmax, cnf_grid** out);
CNF_API void cnf_grid_free(cnf_grid* grid);
CNF_API int64_t cnf_grid_height(const cnf_grid* grid);
CNF_API int64_t cnf_grid_width(const cnf_grid* grid);
CNF_API const double* cnf_grid_values(const cnf_grid* grid);
CNF_API cnf_status cnf_grid_range(const cnf_grid* grid, double* zmin, double* zmax);

/* CNFG binary container I/O and PGM image emission. */
CNF_API cnf_status cnf_grid_read(const char* path, cnf_grid** out);
CNF_API cnf_status cnf_grid_write(const cnf_grid* grid, const char* path);
CNF_API cnf_status cnf_grid_write_pgm(const cnf_grid* grid, const char* path);

/* Gaussian random field by |k|^(-beta/2) spectral synthesis, min-max
 * normalized onto [0,1]. */
CNF_API cnf_status cnf_grid_generate_grf(uint64_t seed, int64_t height, int64_t width,
                                         double beta, cnf_grid** out);

/* Affine [zmin,zmax] -> [0,1] normalization (and its exact inverse from the
 * stored metadata). */
CNF_API cnf_status cnf_grid_normalize(const cnf_grid* grid, double zmin, double zmax,
                                      cnf_grid** out);
CNF_API cnf_status cnf_grid_denormalize(const cnf_grid* grid, cnf_grid** out);

/* Mean-preserving block pooling / Catmull-Rom bicubic upsampling. */
CNF_API cnf_status cnf_grid_downsample_avg(const cnf_grid* hr, int64_t s, cnf_grid** out);
CNF_API cnf_status cnf_grid_bicubic_upsample(const cnf_grid* lr, int64_t s, cnf_grid** out);

/* Block-additive correction so every s×s block of the result averages to the
 * matching LR pixel exactly. */
CNF_API cnf_status cnf_grid_apply_additive_constraint(const cnf_grid* y_hr, const cnf_grid* x_lr,
                                                      int64_t s, cnf_grid** out);
CNF_API cnf_status cnf_grid_error_map(const cnf_grid* prediction, const cnf_grid* truth,
                                      cnf_grid** out);

/* ---- metrics ----------------------------------------------------------- */

CNF_API cnf_status cnf_metric_mae(const cnf_grid* a, const cnf_grid* b, double* out);
CNF_API cnf_status cnf_metric_rmse(const cnf_grid* a, const cnf_grid* b, double* out);
/* Ensemble CRPS: (1/n)Σ|x_i−y| − (1/2n²)ΣΣ|x_i−x_j|, spatial mean. */
CNF_API cnf_status cnf_metric_crps(const cnf_grid* const* members, int64_t count,
                                   const cnf_grid* truth, double* out);
/* Per-pixel ensemble mean and population standard deviation. */
CNF_API cnf_status cnf_ensemble_stats(const cnf_grid* const* members, int64_t count,
                                      cnf_grid** mean, cnf_grid** stddev);

/* ---- configuration ------------------------------------------------------ */

typedef struct cnf_config cnf_config;

CNF_API cnf_status cnf_config_create(cnf_config** out); /* defaults */
CNF_API void cnf_config_free(cnf_config* config);
/* Unknown keys are CNF_ERR_UNKNOWN_KEY. */
CNF_API cnf_status cnf_config_set(cnf_config* config, const char* key, const char* value);
CNF_API cnf_status cnf_config_get(const cnf_config* config, const char* key, char* buffer,
                                  size_t buffer_size);
CNF_API cnf_status cnf_config_load(cnf_config* config, const char* path);
CNF_API cnf_status cnf_config_save(const cnf_config* config, const char* path);

/* ---- models ------------------------------------------------------------ */

typedef struct cnf_model cnf_model;

/* Fresh identity-initialized model from the config's model keys. */
CNF_API cnf_status cnf_model_create(const cnf_config* config, cnf_model** out);
CNF_API void cnf_model_free(cnf_model* model);
CNF_API cnf_status cnf_model_load(const char* path, cnf_model** out);
CNF_API cnf_status cnf_model_save(const cnf_model* model, const char* path);

/* Exact conditional negative log-likelihood in bits per dimension. */
CNF_API cnf_status cnf_model_nll(const cnf_model* model, const cnf_grid* y_hr,
                                 const cnf_grid* x_lr, double* bits_per_dim);
/* Temperature sampling; tau = 0 is the deterministic prior mean and a fixed
 * (seed, tau) pair reproduces the same field bit for bit. */
CNF_API cnf_status cnf_model_sample(const cnf_model* model, const cnf_grid* x_lr, double tau,
                                    uint64_t seed, cnf_grid** out);

/* ---- commands (the CLI surface) ----------------------------------------- */

CNF_API cnf_status cnf_run_generate(const cnf_config* config, int force);
CNF_API cnf_status cnf_run_train(const cnf_config* config);
CNF_API cnf_status cnf_run_sample(const cnf_config* config);
CNF_API cnf_status cnf_run_evaluate(const cnf_config* config);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CNFLOW_H */
