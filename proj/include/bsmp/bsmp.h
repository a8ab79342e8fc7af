/* C interface to the bsmp library. All handles are opaque; every function
 * returning bsmp_status leaves a message in bsmp_last_error() on failure.
 * Strings returned through char** are owned by the caller and released with
 * bsmp_string_free. */
#ifndef BSMP_BSMP_H
#define BSMP_BSMP_H

#include <stddef.h>
#include <stdint.h>

#if defined(BSMP_BUILDING_LIBRARY)
#define BSMP_API __attribute__((visibility("default")))
#else
#define BSMP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bsmp_status {
  BSMP_OK = 0,
  BSMP_ERR_CONFIG = 1,
  BSMP_ERR_NUMERICAL = 2,
  BSMP_ERR_GRADIENT = 3,
  BSMP_ERR_ORACLE = 4,
  BSMP_ERR_INVARIANT = 5,
  BSMP_ERR_IO = 6,
  BSMP_ERR_INTERNAL = 100
} bsmp_status;

typedef struct bsmp_problem bsmp_problem;
typedef struct bsmp_bundle bsmp_bundle;
typedef struct bsmp_control bsmp_control;
typedef struct bsmp_trajectory bsmp_trajectory;
typedef struct bsmp_adjoint bsmp_adjoint;

/* Hermite total degree of the conditional-expectation regression and its
 * ridge weight (negative: scaled automatically). */
typedef struct bsmp_regression {
  int degree;
  double ridge;
} bsmp_regression;

BSMP_API const char* bsmp_version(void);
BSMP_API const char* bsmp_last_error(void);
BSMP_API void bsmp_string_free(char* text);
BSMP_API bsmp_regression bsmp_regression_default(void);

/* Worker threads for path-parallel loops. Results do not depend on it. */
BSMP_API void bsmp_set_threads(int workers);
BSMP_API int bsmp_threads(void);

/* ---- built-in problems ---- */
BSMP_API int bsmp_problem_count(void);
/* NULL when out of range. */
BSMP_API const char* bsmp_problem_name(int index);
BSMP_API bsmp_status bsmp_problem_open(const char* name, bsmp_problem** out);
/* Oracle enumeration settings; non-positive arguments keep the current value. */
BSMP_API bsmp_status bsmp_problem_set_oracle(bsmp_problem* problem, int blocks, int resolution, int substeps);
/* Fine time steps of the oracle's own integration grid (blocks * substeps). */
BSMP_API bsmp_status bsmp_problem_oracle_steps(const bsmp_problem* problem, int* steps);
BSMP_API bsmp_status bsmp_problem_dims(const bsmp_problem* problem, int* n, int* d, int* k);
/* Default relaxed weights of the problem (count 0 when it has none). */
BSMP_API bsmp_status bsmp_problem_relaxed_weights(const bsmp_problem* problem, double* out, size_t capacity,
                                                  size_t* count);
BSMP_API void bsmp_problem_free(bsmp_problem* problem);

/* ---- Brownian paths on a uniform grid of the problem's horizon ---- */
BSMP_API bsmp_status bsmp_bundle_sample(const bsmp_problem* problem, int steps, int paths, uint64_t seed,
                                        bsmp_bundle** out);
BSMP_API void bsmp_bundle_free(bsmp_bundle* bundle);

/* ---- controls ---- */
/* description: builtin | const:<v1,..> | oracle | feedback:sign */
BSMP_API bsmp_status bsmp_control_resolve(const bsmp_problem* problem, const bsmp_bundle* bundle,
                                          const char* description, bsmp_control** out);
/* Constant relaxed control over the problem's finite control grid. */
BSMP_API bsmp_status bsmp_control_relaxed(const bsmp_problem* problem, const double* weights, size_t count,
                                          bsmp_control** out);
/* Dirac embedding of a strict control as a relaxed one. */
BSMP_API bsmp_status bsmp_control_embed(const bsmp_control* strict_control, bsmp_control** out);
BSMP_API bsmp_status bsmp_control_spike(const bsmp_control* base, const bsmp_bundle* bundle, double tau, double width,
                                        const double* value, size_t k, bsmp_control** out);
BSMP_API bsmp_status bsmp_control_chattering(const bsmp_control* relaxed, const bsmp_bundle* bundle, int level,
                                             bsmp_control** out);
BSMP_API int bsmp_control_is_relaxed(const bsmp_control* control);
BSMP_API const char* bsmp_control_label(const bsmp_control* control);
BSMP_API bsmp_status bsmp_control_distance(const bsmp_control* a, const bsmp_control* b, const bsmp_bundle* bundle,
                                           double* out);
BSMP_API void bsmp_control_free(bsmp_control* control);

/* ---- state and adjoint ---- */
BSMP_API bsmp_status bsmp_solve(const bsmp_control* control, const bsmp_bundle* bundle, bsmp_regression regression,
                                bsmp_trajectory** out);
BSMP_API bsmp_status bsmp_trajectory_cost(const bsmp_trajectory* traj, double* value, double* standard_error);
BSMP_API bsmp_status bsmp_trajectory_y(const bsmp_trajectory* traj, int path, int node, double* out, size_t n);
/* z in column-major order, n * d values. */
BSMP_API bsmp_status bsmp_trajectory_z(const bsmp_trajectory* traj, int path, int node, double* out, size_t nd);
BSMP_API void bsmp_trajectory_free(bsmp_trajectory* traj);

BSMP_API bsmp_status bsmp_adjoint_solve(const bsmp_trajectory* traj, bsmp_adjoint** out);
BSMP_API bsmp_status bsmp_adjoint_p(const bsmp_adjoint* adjoint, int path, int node, double* out, size_t n);
BSMP_API void bsmp_adjoint_free(bsmp_adjoint* adjoint);

/* ---- artifacts (JSON reports, CSV series) ---- */
/* max_paths < 0 writes every path. */
BSMP_API bsmp_status bsmp_trajectory_csv(const bsmp_trajectory* traj, int max_paths, char** out);
BSMP_API bsmp_status bsmp_cost_json(const bsmp_trajectory* traj, char** out);
BSMP_API bsmp_status bsmp_adjoint_csv(const bsmp_adjoint* adjoint, int max_paths, char** out);

/* Maximum-condition check of the adjoint's control (strict or relaxed form).
 * tolerance < 0: automatic. blocks < 0: the oracle's blocks for oracle
 * controls, pointwise otherwise. resolution 0: the control set's default. */
BSMP_API bsmp_status bsmp_check_json(const bsmp_adjoint* adjoint, double tolerance, int blocks, int resolution,
                                     int* pass, char** out);
BSMP_API bsmp_status bsmp_sufficiency_json(const bsmp_problem* problem, int samples, uint64_t seed, int relaxed,
                                           int* pass, char** out);
BSMP_API bsmp_status bsmp_spike_study_json(const bsmp_control* control, const bsmp_bundle* bundle,
                                           bsmp_regression regression, double tau, const double* value, size_t k,
                                           const double* widths, size_t count, char** out);
BSMP_API bsmp_status bsmp_chattering_study_json(const bsmp_control* relaxed, const bsmp_bundle* bundle,
                                                bsmp_regression regression, const int* levels, size_t count,
                                                char** out);
/* Test functions f(t, a) = a_0 and f(t, a) = t^2. */
BSMP_API bsmp_status bsmp_stable_study_json(const bsmp_control* relaxed, const bsmp_bundle* bundle, const int* levels,
                                            size_t count, char** out);
BSMP_API bsmp_status bsmp_improve_json(const bsmp_control* initial, const bsmp_bundle* bundle,
                                       bsmp_regression regression, int iterations, int resolution, char** out);
BSMP_API bsmp_status bsmp_oracle_json(const bsmp_problem* problem, char** out);
BSMP_API bsmp_status bsmp_restrict_verify_json(const bsmp_control* control, const bsmp_bundle* bundle,
                                               bsmp_regression regression, int* pass, char** out);

/* Writes through a temporary file and renames it into place. */
BSMP_API bsmp_status bsmp_write_file(const char* path, const char* content);

/* ---- acceptance suite ---- */
typedef void (*bsmp_suite_callback)(int id, int pass, const char* title, const char* summary, const char* artifact,
                                    void* user);
BSMP_API int bsmp_suite_count(void);
BSMP_API bsmp_status bsmp_suite_criterion(int index, int* id, const char** title);
/* Runs the criteria listed in `only` (all when count is 0) in id order. */
BSMP_API bsmp_status bsmp_suite_run(uint64_t seed, const int* only, size_t count, bsmp_suite_callback callback,
                                    void* user, int* failures);

#ifdef __cplusplus
}
#endif

#endif
