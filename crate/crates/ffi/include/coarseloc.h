/* C interface to coarseloc. Generated by cbindgen; do not edit. */

#ifndef COARSELOC_H
#define COARSELOC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call. Anything other than `Ok` leaves a description for
 * `coarseloc_last_error` on the calling thread.
 */
typedef enum CoarselocStatus {
  CoarselocStatus_Ok = 0,
  /**
   * A required pointer argument was null.
   */
  CoarselocStatus_NullPointer = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  CoarselocStatus_BadUtf8 = 2,
  /**
   * The scenario failed to parse or to validate.
   */
  CoarselocStatus_BadConfig = 3,
  /**
   * The requested start state or landmark is inconsistent with the
   * scenario.
   */
  CoarselocStatus_BadStart = 4,
  /**
   * Creating or writing experiment outputs failed.
   */
  CoarselocStatus_Io = 5,
  /**
   * An index or buffer length did not match the object.
   */
  CoarselocStatus_OutOfRange = 6,
  /**
   * An internal panic was caught at the boundary.
   */
  CoarselocStatus_Panic = 7,
} CoarselocStatus;

/**
 * A validated scenario: plant, partition, boxes, and certified constants.
 */
typedef struct CoarselocScenario CoarselocScenario;

/**
 * One closed-loop trial: per-step records plus the violation log.
 */
typedef struct CoarselocTrace CoarselocTrace;

/**
 * Per-step scalars of a trace. `diam_xk_cloud` is NaN on steps without
 * contact, where no current-state estimate exists.
 */
typedef struct CoarselocStep {
  size_t k;
  bool contact;
  bool in_recovery;
  double diam_x0_cloud;
  double diam_x0_bound;
  double diam_m_cloud;
  double diam_xk_cloud;
} CoarselocStep;

/**
 * Batch totals of `coarseloc_run_experiment`.
 */
typedef struct CoarselocSummary {
  size_t trials;
  /**
   * Guarantees that failed across all trials; zero on a sound run.
   */
  size_t violations;
  /**
   * Longest run of consecutive contactless steps in any trial.
   */
  size_t max_gap;
  double wall_seconds;
} CoarselocSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message text of the most recent failure on this thread. Returns the full
 * message length in bytes (excluding the NUL terminator); the copy into
 * `buf` is truncated to `cap - 1` bytes and NUL-terminated.
 *
 * # Safety
 * `buf` must be null or point at `cap` writable bytes.
 */
size_t coarseloc_last_error(char *buf, size_t cap);

/**
 * Static name of a status code, for logs.
 */
const char *coarseloc_status_name(enum CoarselocStatus status);

/**
 * Parses and validates a scenario from TOML text. On success `*out` owns
 * the scenario and must be released with `coarseloc_scenario_free`; on
 * failure `*out` is set to null.
 *
 * # Safety
 * `text` must be null or NUL-terminated; `out` must be null or writable.
 */
enum CoarselocStatus coarseloc_scenario_from_toml(const char *text, struct CoarselocScenario **out);

/**
 * Like `coarseloc_scenario_from_toml`, reading the text from a file.
 *
 * # Safety
 * `path` must be null or NUL-terminated; `out` must be null or writable.
 */
enum CoarselocStatus coarseloc_scenario_load(const char *path, struct CoarselocScenario **out);

/**
 * Releases a scenario. Null is a no-op.
 *
 * # Safety
 * `scenario` must be null or a live handle from a scenario constructor;
 * it is invalid afterwards.
 */
void coarseloc_scenario_free(struct CoarselocScenario *scenario);

/**
 * State dimension, or 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle from a scenario constructor.
 */
size_t coarseloc_scenario_state_dim(const struct CoarselocScenario *scenario);

/**
 * Input dimension, or 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle from a scenario constructor.
 */
size_t coarseloc_scenario_input_dim(const struct CoarselocScenario *scenario);

/**
 * Configured trial count, or 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle from a scenario constructor.
 */
size_t coarseloc_scenario_trials(const struct CoarselocScenario *scenario);

/**
 * Configured steps per trial, or 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle from a scenario constructor.
 */
size_t coarseloc_scenario_max_steps(const struct CoarselocScenario *scenario);

/**
 * Steps a full recovery sweep needs: partition size times controllability
 * index. 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle from a scenario constructor.
 */
size_t coarseloc_scenario_recovery_window(const struct CoarselocScenario *scenario);

/**
 * Guaranteed ceiling on the initial-estimate diameter at step k. NaN for a
 * null handle.
 *
 * # Safety
 * `scenario` must be null or a live handle from a scenario constructor.
 */
double coarseloc_scenario_contraction_bound(const struct CoarselocScenario *scenario, size_t k);

/**
 * Runs one closed-loop trial from an explicit start. `x0` and `m` must each
 * point at `coarseloc_scenario_state_dim` doubles, lie inside their
 * configured boxes, and start within sensing range of each other. On
 * success `*out` owns the trace and must be released with
 * `coarseloc_trace_free`.
 *
 * # Safety
 * `scenario` must be null or a live handle from a scenario constructor.
 * Non-null `x0` and `m` must point at `coarseloc_scenario_state_dim`
 * doubles; `out` must be null or writable.
 */
enum CoarselocStatus coarseloc_run_trial(const struct CoarselocScenario *scenario,
                                         const double *x0,
                                         const double *m,
                                         struct CoarselocTrace **out);

/**
 * Releases a trace. Null is a no-op.
 *
 * # Safety
 * `trace` must be null or a live handle from `coarseloc_run_trial`; it
 * is invalid afterwards.
 */
void coarseloc_trace_free(struct CoarselocTrace *trace);

/**
 * Number of recorded steps, or 0 for a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle from `coarseloc_run_trial`.
 */
size_t coarseloc_trace_len(const struct CoarselocTrace *trace);

/**
 * Longest run of consecutive contactless steps, or 0 for a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle from `coarseloc_run_trial`.
 */
size_t coarseloc_trace_max_gap(const struct CoarselocTrace *trace);

/**
 * Number of recovery plans started, or 0 for a null handle.
 *
 * # Safety
 * `trace` must be null or a live handle from `coarseloc_run_trial`.
 */
size_t coarseloc_trace_recovery_events(const struct CoarselocTrace *trace);

/**
 * Number of guarantees that failed during the trial, or 0 for a null
 * handle. Zero on a sound run.
 *
 * # Safety
 * `trace` must be null or a live handle from `coarseloc_run_trial`.
 */
size_t coarseloc_trace_violation_count(const struct CoarselocTrace *trace);

/**
 * Copies the i-th violation message with `coarseloc_last_error` semantics.
 * Returns 0 when the handle is null or the index is past the end.
 *
 * # Safety
 * `trace` must be null or a live handle from `coarseloc_run_trial`.
 * `buf` must be null or point at `cap` writable bytes.
 */
size_t coarseloc_trace_violation(const struct CoarselocTrace *trace,
                                 size_t index,
                                 char *buf,
                                 size_t cap);

/**
 * Copies the scalar fields of step `index` into `*step`.
 *
 * # Safety
 * `trace` must be null or a live handle from `coarseloc_run_trial`.
 * `step` must be null or writable.
 */
enum CoarselocStatus coarseloc_trace_step(const struct CoarselocTrace *trace,
                                          size_t index,
                                          struct CoarselocStep *step);

/**
 * Copies the state at step `index` into `buf`, which must hold exactly
 * `coarseloc_scenario_state_dim` doubles.
 *
 * # Safety
 * `trace` must be null or a live handle from `coarseloc_run_trial`.
 * Non-null `buf` must point at `len` writable doubles.
 */
enum CoarselocStatus coarseloc_trace_state(const struct CoarselocTrace *trace,
                                           size_t index,
                                           double *buf,
                                           size_t len);

/**
 * Copies the control applied at step `index` into `buf`, which must hold
 * exactly `coarseloc_scenario_input_dim` doubles.
 *
 * # Safety
 * `trace` must be null or a live handle from `coarseloc_run_trial`.
 * Non-null `buf` must point at `len` writable doubles.
 */
enum CoarselocStatus coarseloc_trace_control(const struct CoarselocTrace *trace,
                                             size_t index,
                                             double *buf,
                                             size_t len);

/**
 * Runs the configured batch of trials and writes steps.csv, aggregate.csv,
 * and (with `plots`) SVG diameter charts under `out_dir`. Totals land in
 * `*summary`.
 *
 * # Safety
 * `scenario` must be null or a live handle from a scenario constructor.
 * `out_dir` must be null or NUL-terminated; `summary` must be null or
 * writable.
 */
enum CoarselocStatus coarseloc_run_experiment(const struct CoarselocScenario *scenario,
                                              const char *out_dir,
                                              bool plots,
                                              struct CoarselocSummary *summary);

/**
 * Searches for the minimal covering partition at aperture `alpha` in
 * dimension `dim` and reports its size and worst pairwise alignment.
 *
 * # Safety
 * `out_count` and `out_eta` must each be null or writable.
 */
enum CoarselocStatus coarseloc_partition(double alpha,
                                         size_t dim,
                                         uint64_t seed,
                                         size_t *out_count,
                                         double *out_eta);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COARSELOC_H */
