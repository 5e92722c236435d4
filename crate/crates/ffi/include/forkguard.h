#ifndef FORKGUARD_H
#define FORKGUARD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call. Values match the CLI exit codes where
 * they overlap.
 */
typedef enum FgStatus {
  FG_STATUS_OK = 0,
  FG_STATUS_NULL_POINTER = 1,
  FG_STATUS_INVALID_ARGUMENT = 2,
  FG_STATUS_IO = 3,
  FG_STATUS_NUMERICAL = 4,
  FG_STATUS_PANIC = 5,
} FgStatus;

/**
 * Trained collusion classifier. Create with [`fg_model_load`], release with
 * [`fg_model_free`].
 */
typedef struct FgModel FgModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failed call on this thread, or null if the
 * last call succeeded. The pointer stays valid until the next call into
 * this library from the same thread.
 */
const char *fg_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fg_version(void);

/**
 * Number of features expected by [`fg_model_predict`].
 */
size_t fg_feature_count(void);

/**
 * Probability that an attacker with share `q` ever catches up from `lead`
 * blocks behind.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum FgStatus fg_catch_up_probability(double q, int64_t lead, double *out);

/**
 * Double-spend success probability after `n` confirmations.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum FgStatus fg_double_spend_risk(double q, uint32_t n, double *out);

/**
 * Smallest confirmation count with risk below `epsilon`. Writes 0 when no
 * count up to `n_cap` suffices, which is always the case for `q >= 0.5`.
 *
 * # Safety
 * `out_n` must be null or valid for writes.
 */
enum FgStatus fg_min_confirmations(double q, double epsilon, uint32_t n_cap, uint32_t *out_n);

/**
 * Step payoff of a double-spend: `v` if `q >= 0.5`, else `-(v + o * block_value)`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum FgStatus fg_attacker_payoff(double v, uint32_t o, double block_value, double q, double *out);

/**
 * Probability-weighted payoff of an attack against `n` confirmations.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum FgStatus fg_expected_attack_payoff(double v,
                                        uint32_t o,
                                        double block_value,
                                        double q,
                                        uint32_t n,
                                        double *out);

/**
 * Monte Carlo estimate of the double-spend risk. Deterministic in `seed`.
 *
 * # Safety
 * `out_estimate` and `out_std_error` must be null or valid for writes.
 */
enum FgStatus fg_estimate_risk_monte_carlo(double q,
                                           uint32_t n,
                                           uint64_t trials,
                                           uint32_t lead_cutoff,
                                           uint64_t seed,
                                           double *out_estimate,
                                           double *out_std_error);

/**
 * Smoothed defection rate of a stakeholder with `defections` out of
 * `transactions`.
 *
 * # Safety
 * `out` must be null or valid for writes.
 */
enum FgStatus fg_defect_probability(uint64_t defections, uint64_t transactions, double *out);

/**
 * Gate decision: `*out_cancel` is true when `probability >= threshold`.
 *
 * # Safety
 * `out_cancel` must be null or valid for writes.
 */
enum FgStatus fg_decide(double probability, double threshold, bool *out_cancel);

/**
 * Loads a model file written by `forkguard train`.
 *
 * # Safety
 * `path` must be null or a NUL-terminated string; `out_model` must be null
 * or valid for writes.
 */
enum FgStatus fg_model_load(const char *path, struct FgModel **out_model);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle from [`fg_model_load`] not yet freed.
 */
void fg_model_free(struct FgModel *model);

/**
 * Attack probability for one feature vector of length [`fg_feature_count`].
 *
 * # Safety
 * `model` must be null or a live handle; `features` must be null or point
 * to `len` readable doubles; `out` must be null or valid for writes.
 */
enum FgStatus fg_model_predict(const struct FgModel *model,
                               const double *features,
                               size_t len,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FORKGUARD_H */
