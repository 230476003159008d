#ifndef TRENDSENSE_H
#define TRENDSENSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum TsStatus {
  TS_STATUS_OK = 0,
  TS_STATUS_NULL_POINTER = 1,
  /**
   * Invalid data or arguments.
   */
  TS_STATUS_INVALID_INPUT = 2,
  /**
   * Estimation could not proceed (singular design, degenerate groups, ...).
   */
  TS_STATUS_DEGENERATE = 3,
  TS_STATUS_IO = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  TS_STATUS_INTERNAL = 5,
} TsStatus;

typedef enum TsControl {
  TS_CONTROL_NEVER_TREATED = 0,
  TS_CONTROL_NOT_YET_TREATED = 1,
} TsControl;

/**
 * Opaque estimate handle.
 */
typedef struct TsEstimate TsEstimate;

/**
 * Opaque panel handle.
 */
typedef struct TsPanel TsPanel;

/**
 * Violation scenario; `cf_d` in the bounded form.
 */
typedef struct TsScenario {
  double cf_y;
  double cf_d;
  double rho;
} TsScenario;

typedef struct TsBounds {
  double theta;
  double se;
  double theta_minus;
  double theta_plus;
  double se_minus;
  double se_plus;
  double ell_minus;
  double u_plus;
} TsBounds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *ts_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ts_version(void);

/**
 * Loads a long-format CSV panel.
 *
 * `schema_json` maps column names (see the CLI documentation); pass NULL for
 * `unit,time,y,g` without covariates.
 *
 * # Safety
 * `path` and a non-null `schema_json` must be NUL-terminated strings; `out`
 * must be writable. The handle written to `out` must be released with
 * [`ts_panel_free`].
 */
enum TsStatus ts_panel_load_csv(const char *path, const char *schema_json, struct TsPanel **out);

/**
 * Builds a panel from row-major arrays.
 *
 * `outcomes` is `n_units × n_periods`, `covariates` is `n_units × n_cov`
 * (may be NULL when `n_cov` is 0) and `first_treatment[i]` is the first
 * treated period of unit `i`, or 0 for never treated. Units are labelled
 * `0..n_units`.
 *
 * # Safety
 * All non-null pointers must reference arrays of the stated lengths; `out`
 * must be writable.
 */
enum TsStatus ts_panel_from_arrays(size_t n_units,
                                   size_t n_periods,
                                   const int64_t *periods,
                                   const double *outcomes,
                                   size_t n_cov,
                                   const double *covariates,
                                   const int64_t *first_treatment,
                                   struct TsPanel **out);

/**
 * # Safety
 * `panel` must be NULL or a handle from this library not yet freed.
 */
void ts_panel_free(struct TsPanel *panel);

/**
 * # Safety
 * `panel` must be a live handle.
 */
size_t ts_panel_n_units(const struct TsPanel *panel);

/**
 * # Safety
 * `panel` must be a live handle.
 */
size_t ts_panel_n_periods(const struct TsPanel *panel);

/**
 * ATT on a two-period panel with OLS/logit learners and `folds`-fold
 * cross-fitting.
 *
 * # Safety
 * `panel` must be a live handle and `out` writable. Free the result with
 * [`ts_estimate_free`].
 */
enum TsStatus ts_estimate_2x2(const struct TsPanel *panel,
                              size_t folds,
                              uint64_t seed,
                              bool normalized,
                              struct TsEstimate **out);

/**
 * Group-time ATT for cohort `g` at `t_eval` with the standard base period.
 *
 * # Safety
 * `panel` must be a live handle and `out` writable.
 */
enum TsStatus ts_estimate_gt(const struct TsPanel *panel,
                             int64_t g,
                             int64_t t_eval,
                             size_t delta,
                             enum TsControl control,
                             size_t folds,
                             uint64_t seed,
                             bool normalized,
                             struct TsEstimate **out);

/**
 * # Safety
 * `est` must be NULL or a handle from this library not yet freed.
 */
void ts_estimate_free(struct TsEstimate *est);

/**
 * Point estimate and standard error.
 *
 * # Safety
 * `est` must be a live handle; `theta` and `se` writable.
 */
enum TsStatus ts_estimate_values(const struct TsEstimate *est, double *theta, double *se);

/**
 * Bias-adjusted bounds under `scenario` at one-sided confidence `level`.
 *
 * # Safety
 * `est` must be a live handle; `out` writable.
 */
enum TsStatus ts_sensitivity_bounds(const struct TsEstimate *est,
                                    struct TsScenario scenario,
                                    double level,
                                    struct TsBounds *out);

/**
 * Robustness value for the null `h0`; with `level` in (0, 1) the
 * uncertainty-adjusted variant, with `level` = 0 the point version.
 *
 * # Safety
 * `est` must be a live handle; `out` writable.
 */
enum TsStatus ts_robustness_value(const struct TsEstimate *est,
                                  double h0,
                                  double rho,
                                  double level,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRENDSENSE_H */
