#ifndef BVMLAB_H
#define BVMLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum BvmStatus {
  BVM_STATUS_OK = 0,
  BVM_STATUS_NULL_POINTER = 1,
  BVM_STATUS_INVALID_ARGUMENT = 2,
  BVM_STATUS_CONFIG_ERROR = 3,
  BVM_STATUS_DIAGNOSTICS_FAILURE = 4,
  BVM_STATUS_IO_ERROR = 5,
  /**
   * The output buffer was too small; the required size was written.
   */
  BVM_STATUS_BUFFER_TOO_SMALL = 6,
  BVM_STATUS_INTERNAL = 7,
} BvmStatus;

/**
 * Validated experiment configuration.
 */
typedef struct BvmConfig BvmConfig;

/**
 * Tabulated univariate density.
 */
typedef struct BvmDensity BvmDensity;

/**
 * Result of a finished experiment.
 */
typedef struct BvmOutput BvmOutput;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or null. The pointer
 * stays valid until the next call into the library from the same thread.
 */
const char *bvm_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bvm_version(void);

/**
 * Builds a density from `len` grid nodes and nonnegative values, which are
 * renormalized to unit mass.
 *
 * # Safety
 * `grid` and `values` must point to `len` readable doubles and `out` to a
 * writable handle slot.
 */
enum BvmStatus bvm_density_new(const double *grid,
                               const double *values,
                               size_t len,
                               struct BvmDensity **out);

/**
 * Releases a density. Null is ignored.
 *
 * # Safety
 * `d` must be null or a handle from [`bvm_density_new`] not yet freed.
 */
void bvm_density_free(struct BvmDensity *d);

/**
 * Mean and variance of a density.
 *
 * # Safety
 * `d` must be a live handle; `mean` and `variance` writable.
 */
enum BvmStatus bvm_density_moments(const struct BvmDensity *d, double *mean, double *variance);

/**
 * Quantile at probability `p ∈ [0, 1]`.
 *
 * # Safety
 * `d` must be a live handle and `out` writable.
 */
enum BvmStatus bvm_density_quantile(const struct BvmDensity *d, double p, double *out);

/**
 * Total variation distance between two densities.
 *
 * # Safety
 * `p` and `q` must be live handles and `out` writable.
 */
enum BvmStatus bvm_density_tv(const struct BvmDensity *p, const struct BvmDensity *q, double *out);

/**
 * Total variation distance from a density to `N(mean, variance)`.
 *
 * # Safety
 * `d` must be a live handle and `out` writable.
 */
enum BvmStatus bvm_density_tv_normal(const struct BvmDensity *d,
                                     double mean,
                                     double variance,
                                     double *out);

/**
 * Parses and validates an experiment config from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable handle slot.
 */
enum BvmStatus bvm_config_from_json(const char *json, struct BvmConfig **out);

/**
 * Replaces the master seed.
 *
 * # Safety
 * `c` must be a live handle.
 */
enum BvmStatus bvm_config_set_seed(struct BvmConfig *c, uint64_t seed);

/**
 * Releases a config. Null is ignored.
 *
 * # Safety
 * `c` must be null or a live handle.
 */
void bvm_config_free(struct BvmConfig *c);

/**
 * Runs the configured experiment on up to `jobs` threads (0 means all
 * cores).
 *
 * # Safety
 * `c` must be a live handle and `out` a writable handle slot.
 */
enum BvmStatus bvm_run(const struct BvmConfig *c, size_t jobs, struct BvmOutput **out);

/**
 * Number of report rows.
 *
 * # Safety
 * `o` must be a live handle and `out` writable.
 */
enum BvmStatus bvm_output_rows(const struct BvmOutput *o, size_t *out);

/**
 * Copies the report as CSV into `buf`. `needed` (optional) receives the
 * size including the terminating NUL; pass a null `buf` to query it.
 *
 * # Safety
 * `o` must be a live handle; `buf` must have `cap` writable bytes or be null.
 */
enum BvmStatus bvm_output_csv(const struct BvmOutput *o, char *buf, size_t cap, size_t *needed);

/**
 * Copies the JSON summary (medians and quartiles) into `buf`, as
 * [`bvm_output_csv`].
 *
 * # Safety
 * As [`bvm_output_csv`].
 */
enum BvmStatus bvm_output_summary_json(const struct BvmOutput *o,
                                       char *buf,
                                       size_t cap,
                                       size_t *needed);

/**
 * Writes `report.csv`, `report.json` and one SVG per figure in `figures/` under `dir`.
 *
 * # Safety
 * `o` must be a live handle and `dir` a NUL-terminated path.
 */
enum BvmStatus bvm_output_write(const struct BvmOutput *o, const char *dir);

/**
 * Releases an output. Null is ignored.
 *
 * # Safety
 * `o` must be null or a live handle.
 */
void bvm_output_free(struct BvmOutput *o);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BVMLAB_H */
