#ifndef PERMBET_H
#define PERMBET_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PermbetStatus {
  PERMBET_STATUS_OK = 0,
  PERMBET_STATUS_NULL_POINTER = 1,
  PERMBET_STATUS_INVALID_ARGUMENT = 2,
  PERMBET_STATUS_INVALID_ALPHA = 3,
  PERMBET_STATUS_INVALID_CONFIG = 4,
  PERMBET_STATUS_ALREADY_STOPPED = 5,
  PERMBET_STATUS_CALLED_AFTER_LOSS = 6,
  PERMBET_STATUS_DEGENERATE_POSTERIOR = 7,
  PERMBET_STATUS_STREAM_EXHAUSTED = 8,
  PERMBET_STATUS_PANIC = 99,
} PermbetStatus;

typedef enum PermbetStopReason {
  PERMBET_STOP_REASON_RUNNING = 0,
  PERMBET_STOP_REASON_REJECTED = 1,
  PERMBET_STOP_REASON_FUTILITY = 2,
  PERMBET_STOP_REASON_EXHAUSTED = 3,
  PERMBET_STOP_REASON_EXTERNAL = 4,
} PermbetStopReason;

/**
 * Opaque sequential test handle.
 */
typedef struct PermbetTest PermbetTest;

/**
 * Snapshot of a running test.
 */
typedef struct PermbetState {
  uint64_t t;
  uint64_t losses;
  double log_wealth;
  double p_value;
  enum PermbetStopReason stop_reason;
} PermbetState;

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *permbet_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *permbet_version(void);

/**
 * Creates a test from a strategy config in JSON, e.g.
 * `{"kind":"binomial"}`. `futility` is the futility threshold; a negative
 * value selects the default (`alpha`) and zero disables it.
 *
 * # Safety
 * `config_json` must be a valid NUL-terminated string and `out` a valid
 * pointer.
 */
enum PermbetStatus permbet_test_new(const char *config_json,
                                    double alpha,
                                    double futility,
                                    struct PermbetTest **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `test` must come from [`permbet_test_new`] and not be freed twice.
 */
void permbet_test_free(struct PermbetTest *test);

/**
 * Feeds one indicator (`loss` nonzero means a loss). `stop` (may be
 * null) receives the stop reason, `Running` if the test continues.
 *
 * # Safety
 * `test` must be a live handle; `stop` null or valid.
 */
enum PermbetStatus permbet_test_observe(struct PermbetTest *test,
                                        uint8_t loss,
                                        enum PermbetStopReason *stop);

/**
 * Bet `(b0, b1)` for the next round.
 *
 * # Safety
 * All pointers must be valid.
 */
enum PermbetStatus permbet_test_next_bet(const struct PermbetTest *test, double *b0, double *b1);

/**
 * Current state of the test.
 *
 * # Safety
 * Both pointers must be valid.
 */
enum PermbetStatus permbet_test_state(const struct PermbetTest *test, struct PermbetState *out);

/**
 * Log wealth of the binomial strategy after `t` rounds with `losses`
 * losses.
 *
 * # Safety
 * `out` must be valid.
 */
enum PermbetStatus permbet_binomial_log_wealth(uint64_t t, uint64_t losses, double p, double *out);

/**
 * Log wealth of the uniform-mixture strategy with cap `c`.
 *
 * # Safety
 * `out` must be valid.
 */
enum PermbetStatus permbet_mixture_log_wealth(uint64_t t, uint64_t losses, double c, double *out);

/**
 * Permutation p-value `(1 + losses)/(1 + horizon)`.
 *
 * # Safety
 * `out` must be valid.
 */
enum PermbetStatus permbet_perm_pvalue(uint64_t losses, uint64_t horizon, double *out);

/**
 * Anytime-valid permutation p-value at time `tau`.
 *
 * # Safety
 * `out` must be valid.
 */
enum PermbetStatus permbet_anytime_perm_pvalue(uint64_t losses,
                                               uint64_t tau,
                                               uint64_t horizon,
                                               double *out);

/**
 * Anytime-valid Besag-Clifford p-value at time `tau`; `t_max` zero means
 * no cap.
 *
 * # Safety
 * `out` must be valid.
 */
enum PermbetStatus permbet_anytime_bc_pvalue(uint64_t losses,
                                             uint64_t tau,
                                             uint64_t t_max,
                                             uint64_t h,
                                             double *out);

/**
 * Besag-Clifford p-value for `n` indicator bytes (nonzero = loss).
 * `stop_time` may be null.
 *
 * # Safety
 * `bits` must point to `n` readable bytes; `out` must be valid.
 */
enum PermbetStatus permbet_bc_pvalue(const uint8_t *bits,
                                     size_t n,
                                     uint64_t h,
                                     uint64_t horizon,
                                     double *out,
                                     uint64_t *stop_time);

#endif  /* PERMBET_H */
