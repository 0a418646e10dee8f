#ifndef GAMMACOP_H
#define GAMMACOP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * `space` argument of [`gc_sample`]: draws from the model.
 */
#define GC_SPACE_GAMMA 0

/**
 * `space` argument of [`gc_sample`]: draws from the Laplace copula.
 */
#define GC_SPACE_COPULA 1

typedef enum GcStatus {
  GC_STATUS_OK = 0,
  GC_STATUS_ARGUMENT = 1,
  GC_STATUS_PARSE = 2,
  GC_STATUS_DOMAIN = 3,
  GC_STATUS_PRECONDITION = 4,
  GC_STATUS_EXISTENCE = 5,
  GC_STATUS_MODEL = 6,
  GC_STATUS_CONVERGENCE = 7,
  GC_STATUS_NUMERIC = 8,
  GC_STATUS_IO = 9,
  GC_STATUS_NULL_POINTER = 10,
  GC_STATUS_PANIC = 11,
} GcStatus;

/**
 * Opaque copula handle.
 */
typedef struct GcCopula GcCopula;

/**
 * Opaque model handle.
 */
typedef struct GcModel GcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *gc_version(void);

/**
 * Message of the last failed call on this thread (empty after a success).
 * Valid until the next call into the library on the same thread.
 */
const char *gc_last_error_message(void);

/**
 * Parses a model from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum GcStatus gc_model_from_json(const char *json, struct GcModel **out);

/**
 * # Safety
 * `model` must come from [`gc_model_from_json`] and not be freed yet, or be null.
 */
void gc_model_free(struct GcModel *model);

/**
 * Dimension of the model, 0 for a null handle.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
size_t gc_model_dimension(const struct GcModel *model);

/**
 * Infinite-divisibility verdict at tolerance `tol`.
 *
 * # Safety
 * `model` must be a live handle and `divisible` writable.
 */
enum GcStatus gc_model_check_divisible(const struct GcModel *model, double tol, bool *divisible);

/**
 * Log density at `x[0..len]`.
 *
 * # Safety
 * `x` must point to `len` doubles and `out` be writable.
 */
enum GcStatus gc_model_logpdf(const struct GcModel *model,
                              const double *x,
                              size_t len,
                              double *out);

/**
 * Laplace copula of the model. With `force`, the divisibility gate is
 * replaced by a rectangle-mass check.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum GcStatus gc_copula_new(const struct GcModel *model, bool force, struct GcCopula **out);

/**
 * # Safety
 * `copula` must come from [`gc_copula_new`] and not be freed yet, or be null.
 */
void gc_copula_free(struct GcCopula *copula);

/**
 * # Safety
 * `v` must point to `len` doubles and `out` be writable.
 */
enum GcStatus gc_copula_cdf(const struct GcCopula *copula,
                            const double *v,
                            size_t len,
                            double *out);

/**
 * # Safety
 * `v` must point to `len` doubles and `out` be writable.
 */
enum GcStatus gc_copula_pdf(const struct GcCopula *copula,
                            const double *v,
                            size_t len,
                            double *out);

/**
 * `C(v2 | v1)` of a bivariate copula.
 *
 * # Safety
 * `copula` must be a live handle and `out` writable.
 */
enum GcStatus gc_copula_conditional(const struct GcCopula *copula,
                                    double v1,
                                    double v2,
                                    double *out);

/**
 * Kendall's tau of a bivariate copula, closed form.
 *
 * # Safety
 * `copula` must be a live handle and `out` writable.
 */
enum GcStatus gc_kendall_tau(const struct GcCopula *copula, double *out);

/**
 * Spearman's rho of a bivariate copula, closed form.
 *
 * # Safety
 * `copula` must be a live handle and `out` writable.
 */
enum GcStatus gc_spearman_rho(const struct GcCopula *copula, double *out);

/**
 * Writes `count` draws row-major into `out`, which must hold
 * `out_len >= count * dimension` doubles.
 *
 * # Safety
 * `model` must be a live handle and `out` point to `out_len` writable doubles.
 */
enum GcStatus gc_sample(const struct GcModel *model,
                        uint32_t space,
                        size_t count,
                        uint64_t seed,
                        uint64_t stream,
                        double *out,
                        size_t out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GAMMACOP_H */
