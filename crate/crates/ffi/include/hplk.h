#ifndef HPLK_H
#define HPLK_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  HPLK_FORMAT_CSV = 0,
  HPLK_FORMAT_JSON = 1,
  HPLK_FORMAT_BINARY = 2,
} HplkFormat;

typedef enum {
  HPLK_STATUS_OK = 0,
  HPLK_STATUS_NULL_POINTER = 1,
  HPLK_STATUS_INVALID_ARGUMENT = 2,
  HPLK_STATUS_NOT_CONVERGED = 3,
  HPLK_STATUS_NUMERICAL_FAILURE = 4,
  HPLK_STATUS_IO = 5,
  HPLK_STATUS_PANIC = 6,
} HplkStatus;

/**
 * Rotation-number grid.
 */
typedef struct HplkPortrait HplkPortrait;

/**
 * Truncated series solution.
 */
typedef struct HplkSeries HplkSeries;

typedef struct {
  double re;
  double im;
} HplkComplex;

typedef struct {
  double rho;
  double uncertainty;
  bool locked;
  bool converged;
} HplkRotation;

typedef struct {
  double b;
  double a;
  double rho;
  double uncertainty;
  bool locked;
  bool converged;
  bool boundary;
} HplkCell;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hplk_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated,
 * always NUL-terminated when `len > 0`) and returns its full length in
 * bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t hplk_last_error(char *buf, size_t len);

/**
 * Entire solution `E = Σ_{k≥0} a_k z^k` and its constant `ξ`.
 *
 * # Safety
 * `out` and `xi_out` must be valid for writes.
 */
HplkStatus hplk_series_entire(HplkComplex n,
                              HplkComplex lambda,
                              HplkComplex mu,
                              double tol,
                              size_t length,
                              HplkSeries **out,
                              HplkComplex *xi_out);

/**
 * Forward series `z^b Σ_{k≥0} a_k z^k` of the Heun recurrence.
 *
 * # Safety
 * `out` must be valid for a write.
 */
HplkStatus hplk_series_forward(HplkComplex n,
                               HplkComplex lambda,
                               HplkComplex mu,
                               HplkComplex b,
                               double tol,
                               size_t length,
                               HplkSeries **out);

/**
 * Value and derivative of the series at `z`.
 *
 * # Safety
 * `s` must be a live handle; `value` and `derivative` valid for writes.
 */
HplkStatus hplk_series_eval(const HplkSeries *s,
                            HplkComplex z,
                            HplkComplex *value,
                            HplkComplex *derivative);

/**
 * Index range `[first, last]` of the stored coefficients.
 *
 * # Safety
 * `s` must be a live handle; `first` and `last` valid for writes.
 */
HplkStatus hplk_series_range(const HplkSeries *s, int64_t *first, int64_t *last);

/**
 * Coefficient `a_k`; zero outside the stored range.
 *
 * # Safety
 * `s` must be a live handle; `out` valid for a write.
 */
HplkStatus hplk_series_coeff(const HplkSeries *s, int64_t k, HplkComplex *out);

/**
 * Releases a series handle; null is ignored.
 *
 * # Safety
 * `s` must be null or a handle not yet freed.
 */
void hplk_series_free(HplkSeries *s);

/**
 * Value of the entire-solution equation and its normalizing scale.
 *
 * # Safety
 * `value` and `scale` must be valid for writes.
 */
HplkStatus hplk_xi(HplkComplex l,
                   HplkComplex lambda,
                   HplkComplex mu,
                   double tol,
                   HplkComplex *value,
                   double *scale);

/**
 * Rotation number of the phase equation at `(ω, B, A)`. Returns
 * `NotConverged` with `out` filled when the estimate misses `tol`.
 *
 * # Safety
 * `out` must be valid for a write.
 */
HplkStatus hplk_rotation_number(double omega, double b, double a, double tol, HplkRotation *out);

/**
 * Monodromy matrix of the linear system, row-major into `out[4]`.
 *
 * # Safety
 * `out` must be valid for four writes.
 */
HplkStatus hplk_monodromy(double omega, double b, double a, double tol, HplkComplex *out);

/**
 * Scans `nb × na` grid points in parallel.
 *
 * # Safety
 * `out` must be valid for a write.
 */
HplkStatus hplk_portrait_scan(double omega,
                              double b_lo,
                              double b_hi,
                              size_t nb,
                              double a_lo,
                              double a_hi,
                              size_t na,
                              double tol,
                              HplkPortrait **out);

/**
 * Grid dimensions.
 *
 * # Safety
 * `p` must be a live handle; `nb` and `na` valid for writes.
 */
HplkStatus hplk_portrait_dims(const HplkPortrait *p, size_t *nb, size_t *na);

/**
 * One grid cell.
 *
 * # Safety
 * `p` must be a live handle; `out` valid for a write.
 */
HplkStatus hplk_portrait_cell(const HplkPortrait *p, size_t ib, size_t ia, HplkCell *out);

/**
 * Writes the portrait to `path`.
 *
 * # Safety
 * `p` must be a live handle and `path` a NUL-terminated UTF-8 string.
 */
HplkStatus hplk_portrait_write(const HplkPortrait *p, const char *path, HplkFormat format);

/**
 * Releases a portrait handle; null is ignored.
 *
 * # Safety
 * `p` must be null or a handle not yet freed.
 */
void hplk_portrait_free(HplkPortrait *p);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HPLK_H */
