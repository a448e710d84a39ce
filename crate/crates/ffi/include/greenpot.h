#ifndef GREENPOT_H
#define GREENPOT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes.
 */
typedef enum gp_status {
  GP_STATUS_OK = 0,
  GP_STATUS_NULL_POINTER = 1,
  GP_STATUS_DIMENSION_MISMATCH = 2,
  GP_STATUS_OUT_OF_RANGE = 3,
  GP_STATUS_OUTSIDE_DOMAIN = 4,
  GP_STATUS_SINGULAR = 5,
  GP_STATUS_INVALID_INPUT = 6,
  GP_STATUS_UNSUPPORTED = 7,
  GP_STATUS_RESOURCE_LIMIT = 8,
  /**
   * Numerical failure (quadrature, step budget) or a caught panic.
   */
  GP_STATUS_INTERNAL = 9,
} gp_status;

/**
 * Outcome of the inverse M-matrix test.
 */
typedef enum gp_verdict {
  GP_VERDICT_POTENTIAL = 0,
  GP_VERDICT_NOT_POTENTIAL = 1,
  GP_VERDICT_SINGULAR = 2,
  GP_VERDICT_UNRELIABLE = 3,
} gp_verdict;

/**
 * Killed Green matrix of a finite lattice set.
 */
typedef struct gp_killed_green gp_killed_green;

/**
 * Dense real matrix.
 */
typedef struct gp_matrix gp_matrix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message on this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length, or 0 if none.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null.
 */
size_t gp_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gp_version(void);

/**
 * Whole-space Newtonian Green function `C(d) |x-y|^(2-d)`, `d >= 3`.
 *
 * # Safety
 * `x` and `y` must point to `d` doubles; `out` must be writable.
 */
enum gp_status gp_free_green(size_t d, const double *x, const double *y, double *out);

/**
 * Green function of the disk of the given radius centred at the origin.
 *
 * # Safety
 * `x` and `y` must point to 2 doubles; `out` must be writable.
 */
enum gp_status gp_disk_green(double radius, const double *x, const double *y, double *out);

/**
 * Stability index `alpha` and constant `D` of the Riesz kernel matching the
 * Hadamard power `beta` in dimension `d`.
 *
 * # Safety
 * Both out-pointers must be writable.
 */
enum gp_status gp_riesz_params(size_t d, double beta, double *alpha, double *d_const);

/**
 * Builds a matrix from `rows * cols` row-major doubles.
 *
 * # Safety
 * `data` must point to `rows * cols` doubles; `out` must be writable.
 */
enum gp_status gp_matrix_new(size_t rows, size_t cols, const double *data, struct gp_matrix **out);

/**
 * Releases a matrix. Null is ignored.
 *
 * # Safety
 * `m` must come from this library and not be used afterwards.
 */
void gp_matrix_free(struct gp_matrix *m);

/**
 * # Safety
 * `m` must be a live handle; the out-pointers must be writable.
 */
enum gp_status gp_matrix_shape(const struct gp_matrix *m, size_t *rows, size_t *cols);

/**
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum gp_status gp_matrix_get(const struct gp_matrix *m, size_t i, size_t j, double *out);

/**
 * Inverse M-matrix test with relative tolerance `tol`.
 *
 * # Safety
 * `m` must be a live handle; `verdict` must be writable.
 */
enum gp_status gp_is_inverse_m_matrix(const struct gp_matrix *m,
                                      double tol,
                                      enum gp_verdict *verdict);

/**
 * Entrywise power `u_ij^beta` as a new matrix.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum gp_status gp_hadamard_power(const struct gp_matrix *m, double beta, struct gp_matrix **out);

/**
 * Entrywise exponential `exp(alpha u_ij)` as a new matrix.
 *
 * # Safety
 * `m` must be a live handle; `out` must be writable.
 */
enum gp_status gp_hadamard_exp(const struct gp_matrix *m, double alpha, struct gp_matrix **out);

/**
 * Killed Green matrix of `count` lattice points in dimension `d`, given as
 * `count * d` row-major integer coordinates. Points are reordered
 * lexicographically; duplicates are rejected.
 *
 * # Safety
 * `points` must point to `count * d` integers; `out` must be writable.
 */
enum gp_status gp_killed_green_new(size_t d,
                                   const int64_t *points,
                                   size_t count,
                                   struct gp_killed_green **out);

/**
 * Releases a killed Green matrix. Null is ignored.
 *
 * # Safety
 * `g` must come from this library and not be used afterwards.
 */
void gp_killed_green_free(struct gp_killed_green *g);

/**
 * Number of points in the set.
 *
 * # Safety
 * `g` must be a live handle; `out` must be writable.
 */
enum gp_status gp_killed_green_len(const struct gp_killed_green *g, size_t *out);

/**
 * Coordinates of the `i`-th point (lexicographic order) into `coords`.
 *
 * # Safety
 * `g` must be a live handle; `coords` must hold `d` integers.
 */
enum gp_status gp_killed_green_point(const struct gp_killed_green *g, size_t i, int64_t *coords);

/**
 * Expected visits to `y` of the walk started at `x`; both are `d` integer
 * coordinates. Points outside the set give 0.
 *
 * # Safety
 * `g` must be a live handle; `x` and `y` must hold `d` integers.
 */
enum gp_status gp_killed_green_get(const struct gp_killed_green *g,
                                   const int64_t *x,
                                   const int64_t *y,
                                   double *out);

/**
 * Copies the entries into a new matrix handle.
 *
 * # Safety
 * `g` must be a live handle; `out` must be writable.
 */
enum gp_status gp_killed_green_matrix(const struct gp_killed_green *g, struct gp_matrix **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GREENPOT_H */
