#ifndef SPCRSVD_H
#define SPCRSVD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum SpcrStatus {
  SPCR_STATUS_OK = 0,
  SPCR_STATUS_NULL_POINTER = 1,
  SPCR_STATUS_INVALID_ARGUMENT = 2,
  SPCR_STATUS_DIMENSION_MISMATCH = 3,
  SPCR_STATUS_NON_FINITE = 4,
  SPCR_STATUS_RANK_DEFICIENT = 5,
  SPCR_STATUS_NOT_POSITIVE_DEFINITE = 6,
  /**
   * The solver hit its iteration cap; the returned model is still valid.
   */
  SPCR_STATUS_NOT_CONVERGED = 7,
  SPCR_STATUS_PARSE = 8,
  SPCR_STATUS_IO = 9,
  SPCR_STATUS_MODEL_FORMAT = 10,
  SPCR_STATUS_FOLD_TOO_SMALL = 11,
  SPCR_STATUS_PANIC = 12,
} SpcrStatus;

typedef enum SpcrAlgorithm {
  SPCR_ALGORITHM_ADMM = 0,
  SPCR_ALGORITHM_LADMM = 1,
} SpcrAlgorithm;

/**
 * Preprocessed training data.
 */
typedef struct SpcrDataset SpcrDataset;

/**
 * A fitted model.
 */
typedef struct SpcrModel SpcrModel;

/**
 * Solver settings; initialize with [`spcr_fit_config_default`].
 */
typedef struct SpcrFitConfig {
  size_t k;
  double w;
  double lambda_v;
  double lambda_beta;
  double rho1;
  double rho2;
  double rho3;
  size_t max_iter;
  double tol_abs;
  double tol_rel;
  enum SpcrAlgorithm algorithm;
  uint64_t seed;
} SpcrFitConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread (empty after a
 * successful call). The pointer stays valid until the next call on the
 * same thread.
 */
const char *spcr_last_error_message(void);

/**
 * Writes the library defaults (k = 1, w = 0.1, no penalties, ρ = 1,
 * 2000 iterations, ADMM) into `out`.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `SpcrFitConfig`.
 */
enum SpcrStatus spcr_fit_config_default(struct SpcrFitConfig *out);

/**
 * Centers (and optionally standardizes) `x` (n × p, row-major) and stores
 * it with the response `y` (length n).
 *
 * # Safety
 * `x` must point to `n * p` readable doubles, `y` to `n`, and `out` to a
 * writable handle slot.
 */
enum SpcrStatus spcr_dataset_new(const double *x,
                                 size_t n,
                                 size_t p,
                                 const double *y,
                                 bool standardize,
                                 struct SpcrDataset **out);

/**
 * # Safety
 * `ds` must be null or a handle from [`spcr_dataset_new`] not yet freed.
 */
void spcr_dataset_free(struct SpcrDataset *ds);

/**
 * Fits at the penalties in `cfg`. Returns `NotConverged` (with a valid
 * model in `out`) if the iteration cap was reached.
 *
 * # Safety
 * `ds` and `cfg` must be valid pointers; `out` a writable handle slot.
 */
enum SpcrStatus spcr_fit(const struct SpcrDataset *ds,
                         const struct SpcrFitConfig *cfg,
                         struct SpcrModel **out);

/**
 * K-fold cross-validation over the grid `grid_v × grid_beta`, then a refit
 * at the selected pair. The selected penalties are written to
 * `best_lambda_v` / `best_lambda_beta` when those are non-null.
 *
 * # Safety
 * Grid pointers must reference `nv` and `nb` readable doubles; other
 * pointers as in [`spcr_fit`].
 */
enum SpcrStatus spcr_cross_validate(const struct SpcrDataset *ds,
                                    const struct SpcrFitConfig *cfg,
                                    size_t folds,
                                    const double *grid_v,
                                    size_t nv,
                                    const double *grid_beta,
                                    size_t nb,
                                    uint64_t seed,
                                    double *best_lambda_v,
                                    double *best_lambda_beta,
                                    struct SpcrModel **out);

/**
 * Predicts for `n` raw rows `x` (n × p, row-major) into `out` (length n).
 *
 * # Safety
 * `x` must reference `n * p` readable doubles and `out` `n` writable ones.
 */
enum SpcrStatus spcr_model_predict(const struct SpcrModel *model,
                                   const double *x,
                                   size_t n,
                                   size_t p,
                                   double *out);

/**
 * Number of covariates `p` and components `k`.
 *
 * # Safety
 * `model` must be a live handle; `p` and `k` may be null.
 */
enum SpcrStatus spcr_model_dims(const struct SpcrModel *model, size_t *p, size_t *k);

/**
 * Copies the per-covariate composite coefficients (on the preprocessed
 * scale) into `out`, which must hold `len == p` doubles.
 *
 * # Safety
 * `out` must reference `len` writable doubles.
 */
enum SpcrStatus spcr_model_coefficients(const struct SpcrModel *model, double *out, size_t len);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum SpcrStatus spcr_model_intercept(const struct SpcrModel *model, double *out);

/**
 * Writes 1 to `out` if the solver met its stopping rule, else 0.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum SpcrStatus spcr_model_converged(const struct SpcrModel *model, bool *out);

/**
 * # Safety
 * `model` must be a live handle and `path` a NUL-terminated UTF-8 string.
 */
enum SpcrStatus spcr_model_save(const struct SpcrModel *model, const char *path);

/**
 * # Safety
 * `path` must be a NUL-terminated UTF-8 string and `out` a writable slot.
 */
enum SpcrStatus spcr_model_load(const char *path, struct SpcrModel **out);

/**
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void spcr_model_free(struct SpcrModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPCRSVD_H */
