#ifndef DIURNAL_FFI_H
#define DIURNAL_FFI_H

/* Generated by cbindgen -- do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum DiurnalStatus {
  DIURNAL_STATUS_OK = 0,
  /**
   * Bad arguments or configuration.
   */
  DIURNAL_STATUS_USAGE_ERROR = 1,
  /**
   * Bad or insufficient data (unreadable file, malformed model, ...).
   */
  DIURNAL_STATUS_DATA_ERROR = 2,
  /**
   * A required pointer was null.
   */
  DIURNAL_STATUS_NULL_POINTER = 3,
  /**
   * A string argument was not valid UTF-8.
   */
  DIURNAL_STATUS_INVALID_UTF8 = 4,
  /**
   * The library panicked; state is still consistent.
   */
  DIURNAL_STATUS_PANIC = 5,
} DiurnalStatus;

/**
 * Opaque handle to a loaded per-modality basis.
 */
typedef struct DiurnalModel DiurnalModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the message of the most recent failure on this thread.
 *
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *diurnal_last_error_message(void);

/**
 * Loads a model JSON file into a new handle.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum DiurnalStatus diurnal_model_load(const char *path, struct DiurnalModel **out);

/**
 * Parses a model from a JSON document held in memory.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum DiurnalStatus diurnal_model_from_json(const char *json, struct DiurnalModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must have come from a `diurnal_model_*` constructor and must not
 * be used afterwards.
 */
void diurnal_model_free(struct DiurnalModel *model);

/**
 * Number of slots per day vector (the basis dimension). Zero for null.
 *
 * # Safety
 * `model` must be a live handle or null.
 */
uintptr_t diurnal_model_dim(const struct DiurnalModel *model);

/**
 * Share of variance captured by the first `k` components.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum DiurnalStatus diurnal_model_variance_explained(const struct DiurnalModel *model,
                                                    uintptr_t k,
                                                    double *out);

/**
 * Expands one raw day (slot means in original units) over the basis.
 *
 * Writes `k` coefficients to `coeffs_out` and, through any non-null
 * optional pointers, the subtracted daily mean, the divided-out RMS and
 * the RMS residual norm of the truncated expansion.
 *
 * # Safety
 * `slots` must point to `len` doubles and `coeffs_out` to `k` doubles;
 * the optional out-pointers must each be valid or null.
 */
enum DiurnalStatus diurnal_model_expand_day(const struct DiurnalModel *model,
                                            const double *slots,
                                            uintptr_t len,
                                            uintptr_t k,
                                            double *coeffs_out,
                                            double *mean_out,
                                            double *rms_out,
                                            double *residual_out);

/**
 * Reconstructs a day in original units from `k` coefficients plus the
 * daily mean and RMS returned by `diurnal_model_expand_day`.
 *
 * # Safety
 * `coeffs` must point to `k` doubles and `out` to `dim` doubles.
 */
enum DiurnalStatus diurnal_model_reconstruct(const struct DiurnalModel *model,
                                             const double *coeffs,
                                             uintptr_t k,
                                             double daily_mean,
                                             double rms,
                                             double *out);

/**
 * Diagonalizes a symmetric `n x n` matrix (row-major).
 *
 * Writes eigenvalues in descending order to `values_out` (length `n`) and
 * the matching unit eigenvectors to the rows of `vectors_out` (length
 * `n * n`).
 *
 * # Safety
 * `matrix` must point to `n * n` doubles, `values_out` to `n`, and
 * `vectors_out` to `n * n`.
 */
enum DiurnalStatus diurnal_eigen_symmetric(const double *matrix,
                                           uintptr_t n,
                                           double *values_out,
                                           double *vectors_out);

/**
 * Library version as a static string.
 */
const char *diurnal_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* DIURNAL_FFI_H */
