#ifndef PREDLAB_H
#define PREDLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum PredlabStatus {
  PREDLAB_STATUS_OK = 0,
  PREDLAB_STATUS_NULL_POINTER = 1,
  PREDLAB_STATUS_INVALID_ARGUMENT = 2,
  PREDLAB_STATUS_DOMAIN = 3,
  PREDLAB_STATUS_SPACE_MISMATCH = 4,
  PREDLAB_STATUS_BUDGET_EXCEEDED = 5,
  PREDLAB_STATUS_NULL_CONDITIONING = 6,
  PREDLAB_STATUS_UNSUPPORTED = 7,
  PREDLAB_STATUS_CONFIG = 8,
  PREDLAB_STATUS_IO = 9,
  PREDLAB_STATUS_BUFFER_TOO_SMALL = 10,
  PREDLAB_STATUS_PANIC = 11,
} PredlabStatus;

// A validated process model.
typedef struct PredlabModel PredlabModel;

// A sampled path of a model.
typedef struct PredlabPath PredlabPath;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *predlab_version(void);

// Message of the last failure on this thread, or an empty string. Valid
// until the next failing call on the same thread.
const char *predlab_last_error(void);

// Build the default model of a registered scenario.
//
// # Safety
// `scenario` must be a NUL-terminated string; `out_model` must be writable.
enum PredlabStatus predlab_model_from_scenario(const char *scenario,
                                               struct PredlabModel **out_model);

// Build a model from the JSON form of its parameters, e.g.
// `{"kind":"sine_pair"}`.
//
// # Safety
// `id` and `json` must be NUL-terminated strings; `out_model` must be
// writable.
enum PredlabStatus predlab_model_from_json(const char *id,
                                           const char *json,
                                           struct PredlabModel **out_model);

// Release a model. Null is ignored.
//
// # Safety
// `model` must come from a constructor above and not be used afterwards.
void predlab_model_free(struct PredlabModel *model);

// Dimension of the model's points.
//
// # Safety
// `model` must be a live handle; `out_dim` must be writable.
enum PredlabStatus predlab_model_point_dim(const struct PredlabModel *model, size_t *out_dim);

// Sample the first `n` points of the model from `seed`.
//
// # Safety
// `model` must be a live handle; `out_path` must be writable.
enum PredlabStatus predlab_sample_path(const struct PredlabModel *model,
                                       size_t n,
                                       uint64_t seed,
                                       struct PredlabPath **out_path);

// Release a path. Null is ignored.
//
// # Safety
// `path` must come from [`predlab_sample_path`] and not be used afterwards.
void predlab_path_free(struct PredlabPath *path);

// Number of points in a path.
//
// # Safety
// `path` must be a live handle; `out_len` must be writable.
enum PredlabStatus predlab_path_len(const struct PredlabPath *path, size_t *out_len);

// Copy the path's coordinates, row-major, into `buf`. `out_written`
// receives the number of values needed; if `capacity` is smaller nothing
// is copied and `BufferTooSmall` is returned.
//
// # Safety
// `buf` must hold `capacity` values; `out_written` must be writable.
enum PredlabStatus predlab_path_values(const struct PredlabPath *path,
                                       double *buf,
                                       size_t capacity,
                                       size_t *out_written);

// Exact `E{f(X_{n+1}) | X_1..X_n}` after a prefix of `n_points` points,
// by enumeration. `f_id` names a function of the standard suite.
//
// # Safety
// `prefix` must hold `n_points * dim` values; `f_id` must be a
// NUL-terminated string; `out_value` must be writable.
enum PredlabStatus predlab_enumerate_predictive(const struct PredlabModel *model,
                                                const double *prefix,
                                                size_t n_points,
                                                const char *f_id,
                                                double *out_value);

// `E{f(X_{n+1}) | F_n}` along a sampled path, by the model's closed form or
// filter.
//
// # Safety
// `model` and `path` must be live handles; `f_id` must be a NUL-terminated
// string; `out_value` must be writable.
enum PredlabStatus predlab_closed_form_predictive(const struct PredlabModel *model,
                                                  const struct PredlabPath *path,
                                                  size_t n,
                                                  const char *f_id,
                                                  double *out_value);

// Bounded Lipschitz distance between two discrete measures on the model's
// state space. Atoms are row-major; weights must sum to one.
//
// # Safety
// Each atom array must hold `len * dim` values and each weight array
// `len`; `out_value` must be writable.
enum PredlabStatus predlab_bl_distance(const struct PredlabModel *model,
                                       const double *p_atoms,
                                       const double *p_weights,
                                       size_t p_len,
                                       const double *q_atoms,
                                       const double *q_weights,
                                       size_t q_len,
                                       double *out_value);

// Run a scenario's battery. `paths == 0` keeps the scenario default;
// `threads == 0` uses all cores; a null `out_dir` writes nothing.
// `out_passed` receives 1 if every predicted verdict was observed.
//
// # Safety
// `scenario` must be a NUL-terminated string, `out_dir` null or one;
// `out_passed` must be writable.
enum PredlabStatus predlab_run_scenario(const char *scenario,
                                        uint64_t seed,
                                        size_t paths,
                                        size_t threads,
                                        const char *out_dir,
                                        int *out_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PREDLAB_H */
