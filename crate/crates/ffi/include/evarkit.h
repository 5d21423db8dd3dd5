#ifndef EVARKIT_H
#define EVARKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum {
  EVK_STATUS_OK = 0,
  EVK_STATUS_NULL_POINTER = 1,
  EVK_STATUS_INVALID_UTF8 = 2,
  EVK_STATUS_INVALID_INPUT = 3,
  EVK_STATUS_NUMERICAL = 4,
  EVK_STATUS_PANIC = 5,
} EvkStatus;

/**
 * Verdict of [`evk_worst_case`].
 */
typedef enum {
  EVK_VERDICT_E_VARIABLE = 0,
  EVK_VERDICT_VIOLATED = 1,
  EVK_VERDICT_HYPOTHESIS_EMPTY = 2,
} EvkVerdict;

/**
 * Opaque e-variable handle.
 */
typedef struct EvkEVariable EvkEVariable;

/**
 * Opaque hypothesis handle.
 */
typedef struct EvkHypothesis EvkHypothesis;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a
 * success. The pointer stays valid until the next call on this thread.
 */
const char *evk_last_error_message(void);

/**
 * Builds a hypothesis from `{"grid": ..., "constraints": ...}`.
 *
 * # Safety
 * `json_text` must be a NUL-terminated string and `out` a valid pointer.
 */
EvkStatus evk_hypothesis_from_json(const char *json_text, EvkHypothesis **out);

/**
 * Built-in hypothesis (`{"kind": "mean_var", "params": {"sigma": 1}}`
 * and the like) on the scalar grid `xs[0..n]`.
 *
 * # Safety
 * `kind_json` must be NUL-terminated, `xs` must hold `n` doubles and
 * `out` must be valid.
 */
EvkStatus evk_hypothesis_builtin(const char *kind_json,
                                 const double *xs,
                                 size_t n,
                                 EvkHypothesis **out);

/**
 * # Safety
 * `h` must come from this library and not be used afterwards; null is a no-op.
 */
void evk_hypothesis_free(EvkHypothesis *h);

/**
 * Number of grid points and of constraints.
 *
 * # Safety
 * `h` must be a live handle; `len` and `dim` valid pointers.
 */
EvkStatus evk_hypothesis_shape(const EvkHypothesis *h, size_t *len, size_t *dim);

/**
 * Raw e-variable from `n` nonnegative values.
 *
 * # Safety
 * `values` must hold `n` doubles and `out` must be valid.
 */
EvkStatus evk_evar_from_values(const double *values, size_t n, EvkEVariable **out);

/**
 * `max(0, 1 + Σ πᵢ gᵢ)` on the hypothesis grid.
 *
 * # Safety
 * `h` must be live, `pi` must hold `d` doubles and `out` must be valid.
 */
EvkStatus evk_evar_from_pi(const EvkHypothesis *h,
                           const double *pi,
                           size_t d,
                           double tol,
                           EvkEVariable **out);

/**
 * Number of values of `e`.
 *
 * # Safety
 * `e` must be live and `len` valid.
 */
EvkStatus evk_evar_len(const EvkEVariable *e, size_t *len);

/**
 * Copies the values of `e` into `buf`, which must have room for exactly
 * [`evk_evar_len`] doubles.
 *
 * # Safety
 * `e` must be live and `buf` must hold `cap` doubles.
 */
EvkStatus evk_evar_values(const EvkEVariable *e, double *buf, size_t cap);

/**
 * # Safety
 * `e` must come from this library and not be used afterwards; null is a no-op.
 */
void evk_evar_free(EvkEVariable *e);

/**
 * Worst-case mean of `e` over the discretized hypothesis. `value` is NaN
 * when the hypothesis is empty.
 *
 * # Safety
 * Handles must be live; `value` and `verdict` valid.
 */
EvkStatus evk_worst_case(const EvkEVariable *e,
                         const EvkHypothesis *h,
                         double tol,
                         double *value,
                         EvkVerdict *verdict);

/**
 * Writes 1 if `e` is an e-variable on the grid, else 0.
 *
 * # Safety
 * Handles must be live; `out` valid.
 */
EvkStatus evk_is_evar(const EvkEVariable *e, const EvkHypothesis *h, double tol, int *out);

/**
 * Writes 1 if `1 + Σ πᵢ gᵢ ≥ −tol` at every charged grid point, else 0.
 *
 * # Safety
 * `h` must be live, `pi` must hold `d` doubles and `out` must be valid.
 */
EvkStatus evk_in_pi_phi(const EvkHypothesis *h, const double *pi, size_t d, double tol, int *out);

/**
 * Convex conjugate `ψ*(x)` for a ψ given as JSON, e.g.
 * `{"kind": "gaussian", "params": {"sigma": 1}}`.
 *
 * # Safety
 * `psi_json` must be NUL-terminated and `out` valid.
 */
EvkStatus evk_psi_star(const char *psi_json, double x, double *out);

/**
 * Runs a full `evarkit/1` config, as the command-line tool does. `csv`
 * may be null. On success `report` receives a string to release with
 * [`evk_string_free`] and `exit_code` the tool's exit code.
 *
 * # Safety
 * `config_json` (and `csv` unless null) must be NUL-terminated; `report`
 * and `exit_code` must be valid.
 */
EvkStatus evk_run_json(const char *config_json, const char *csv, char **report, int *exit_code);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards; null is a no-op.
 */
void evk_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EVARKIT_H */
