#ifndef DIRMUSIC_H
#define DIRMUSIC_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DmStatus {
  DM_STATUS_OK = 0,
  DM_STATUS_NULL_POINTER = 1,
  DM_STATUS_INVALID_INPUT = 2,
  DM_STATUS_DOMAIN = 3,
  DM_STATUS_NO_PULSE = 4,
  DM_STATUS_IO = 5,
  DM_STATUS_PARSE = 6,
  DM_STATUS_BUFFER_TOO_SMALL = 7,
  DM_STATUS_PANIC = 8,
} DmStatus;

/**
 * Array geometry (element boresight offsets).
 */
typedef struct DmArray DmArray;

/**
 * Antenna gain pattern.
 */
typedef struct DmPattern DmPattern;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message on this thread into a new string, or return
 * null if the last call succeeded. Release with `dm_string_free`.
 */
char *dm_last_error_message(void);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void dm_string_free(char *s);

/**
 * # Safety
 * `out` must be writable.
 */
enum DmStatus dm_pattern_reference(struct DmPattern **out);

/**
 * Build a pattern from `[a1, b1, c1, a2, b2, c2, ...]`.
 *
 * # Safety
 * `params` must hold `len` doubles; `out` must be writable.
 */
enum DmStatus dm_pattern_new(const double *params, size_t len, struct DmPattern **out);

/**
 * # Safety
 * `p` must come from a `dm_pattern_*` constructor or be null.
 */
void dm_pattern_free(struct DmPattern *p);

/**
 * # Safety
 * `p` must be a live pattern; `out` must be writable.
 */
enum DmStatus dm_pattern_gain(const struct DmPattern *p, double theta_deg, double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum DmStatus dm_array_uniform(size_t n_elements, struct DmArray **out);

/**
 * Offsets in degrees, strictly increasing in `[0, 360)`.
 *
 * # Safety
 * `offsets_deg` must hold `len` doubles; `out` must be writable.
 */
enum DmStatus dm_array_with_offsets(const double *offsets_deg, size_t len, struct DmArray **out);

/**
 * # Safety
 * `a` must be a live array; `out` must be writable.
 */
enum DmStatus dm_array_n_elements(const struct DmArray *a, size_t *out);

/**
 * # Safety
 * `a` must come from a `dm_array_*` constructor or be null.
 */
void dm_array_free(struct DmArray *a);

/**
 * Write the `n_elements` gains at `theta_deg` into `out`.
 *
 * # Safety
 * Handles must be live; `out` must hold `out_len` doubles.
 */
enum DmStatus dm_steering_vector(const struct DmPattern *p,
                                 const struct DmArray *a,
                                 double theta_deg,
                                 double *out,
                                 size_t out_len);

/**
 * Estimate the arrival direction from a row-major `n_channels x n_samples`
 * snapshot block searched on a `grid_step_deg` grid.
 *
 * # Safety
 * Handles must be live; `x` must hold `n_channels * n_samples` doubles;
 * outputs must be writable.
 */
enum DmStatus dm_estimate_doa(const struct DmPattern *p,
                              const struct DmArray *a,
                              const double *x,
                              size_t n_channels,
                              size_t n_samples,
                              double grid_step_deg,
                              double *theta_out,
                              double *peak_out);

/**
 * Spatial spectrum on the grid `0, step, 2*step, ...` below 360. The grid
 * size is stored in `written`; if `out_len` is too small nothing else is
 * written and `DM_STATUS_BUFFER_TOO_SMALL` is returned.
 *
 * # Safety
 * As for `dm_estimate_doa`; `out` must hold `out_len` doubles.
 */
enum DmStatus dm_spatial_spectrum(const struct DmPattern *p,
                                  const struct DmArray *a,
                                  const double *x,
                                  size_t n_channels,
                                  size_t n_samples,
                                  double grid_step_deg,
                                  double *out,
                                  size_t out_len,
                                  size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIRMUSIC_H */
