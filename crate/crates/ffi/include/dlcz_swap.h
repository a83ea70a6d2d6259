#ifndef DLCZ_SWAP_H
#define DLCZ_SWAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DlczForm {
  DLCZ_FORM_APPROX = 0,
  DLCZ_FORM_EXACT = 1,
} DlczForm;

typedef enum DlczStatus {
  DLCZ_STATUS_OK = 0,
  DLCZ_STATUS_NULL_POINTER = 1,
  DLCZ_STATUS_INVALID_ARGUMENT = 2,
  DLCZ_STATUS_PARSE_ERROR = 3,
  DLCZ_STATUS_COMPUTE_ERROR = 4,
  DLCZ_STATUS_PANIC = 5,
} DlczStatus;

/**
 * Opaque parameter set.
 */
typedef struct DlczParams DlczParams;

/**
 * Engine figures at one operating point.
 */
typedef struct DlczSwapSummary {
  double p_es1;
  double visibility;
  double suppression;
  double p_c;
  /**
   * p_c·(V − √h) at the detectors, unclamped.
   */
  double concurrence;
  double concurrence_wootters;
  double concurrence_estimator;
  double p00;
  double p01;
  double p10;
  double p11;
} DlczSwapSummary;

/**
 * Monte Carlo estimates; NaN where the counts do not support one.
 */
typedef struct DlczSimSummary {
  uint64_t n_trials;
  uint64_t n_swaps;
  double visibility;
  double visibility_sigma;
  double suppression;
  double suppression_sigma;
  double p_c;
  double p_c_sigma;
  double concurrence;
  double concurrence_sigma;
} DlczSimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *dlcz_version(void);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
uintptr_t dlcz_last_error_message(char *buf, uintptr_t len);

/**
 * New handle holding the default operating point; never null.
 */
struct DlczParams *dlcz_params_new_default(void);

/**
 * Parses `key = value` lines on top of the defaults.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DlczStatus dlcz_params_from_config(const char *text, struct DlczParams **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `h` must be null or a handle from this library not yet freed.
 */
void dlcz_params_free(struct DlczParams *h);

/**
 * Sets one parameter by key (e.g. `"chi"`, `"cutoff_us"` accepts `"none"`).
 * The handle is left unchanged if the result does not validate.
 *
 * # Safety
 * `h` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum DlczStatus dlcz_params_set(struct DlczParams *h, const char *key, const char *value);

/**
 * Reads one parameter; an unset cutoff reads as NaN.
 *
 * # Safety
 * `h` must be a live handle, `key` NUL-terminated, `out` valid.
 */
enum DlczStatus dlcz_params_get(const struct DlczParams *h, const char *key, double *out);

/**
 * γ(t) at storage time `t_us`.
 *
 * # Safety
 * `h` must be a live handle and `out` valid.
 */
enum DlczStatus dlcz_retrieval_efficiency(const struct DlczParams *h, double t_us, double *out);

/**
 * Cross-correlation at storage time `t_us` with background `z`.
 *
 * # Safety
 * `h` must be a live handle and `out` valid.
 */
enum DlczStatus dlcz_cross_correlation(const struct DlczParams *h,
                                       double t_us,
                                       double z,
                                       double *out);

/**
 * Swapped-state visibility from the two cross-correlations.
 *
 * # Safety
 * `out` must be valid.
 */
enum DlczStatus dlcz_visibility(double g_b, double g_ac, enum DlczForm form, double *out);

/**
 * Suppression parameter h from the two cross-correlations.
 *
 * # Safety
 * `out` must be valid.
 */
enum DlczStatus dlcz_suppression(double g_b, double g_ac, double *out);

/**
 * Cross-correlation threshold for positive concurrence. With `g_b_fixed`
 * NaN both correlations are equal; otherwise g_b is held fixed.
 *
 * # Safety
 * `out` must be valid.
 */
enum DlczStatus dlcz_threshold(enum DlczForm form, double g_b_fixed, double *out);

/**
 * Closed-form swap-and-verify coincidence probability at phase `theta`.
 *
 * # Safety
 * `h` must be a live handle and `out` valid.
 */
enum DlczStatus dlcz_coincidence_probability(const struct DlczParams *h, double theta, double *out);

/**
 * Fock-engine figures with a fringe fit over `n_thetas` phases.
 *
 * # Safety
 * `h` must be a live handle and `out` valid.
 */
enum DlczStatus dlcz_swap_summary(const struct DlczParams *h,
                                  uint32_t n_thetas,
                                  struct DlczSwapSummary *out);

/**
 * Seeded Monte Carlo batch. `conditioned` nonzero starts every trial from
 * two heralded links; zero samples link generation too.
 *
 * # Safety
 * `h` must be a live handle and `out` valid.
 */
enum DlczStatus dlcz_simulate(const struct DlczParams *h,
                              uint64_t n_trials,
                              uint64_t seed,
                              uint32_t n_thetas,
                              int32_t conditioned,
                              struct DlczSimSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DLCZ_SWAP_H */
