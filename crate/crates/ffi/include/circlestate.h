#ifndef CIRCLESTATE_H
#define CIRCLESTATE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CsMode {
  CS_MODE_SIGNAL = 0,
  CS_MODE_IDLER = 1,
} CsMode;

typedef enum CsStatus {
  CS_STATUS_OK = 0,
  CS_STATUS_NULL_POINTER = 1,
  CS_STATUS_INVALID_ARGUMENT = 2,
  CS_STATUS_CUTOFF_MISMATCH = 3,
  CS_STATUS_EVOLUTION_ABORTED = 4,
  CS_STATUS_NULL_CONDITIONING = 5,
  CS_STATUS_BUFFER_TOO_SMALL = 6,
  CS_STATUS_PANIC = 7,
} CsStatus;

/**
 * Sparse generator of the two-mode master equation.
 */
typedef struct CsOperator CsOperator;

/**
 * Two-mode density matrix.
 */
typedef struct CsState CsState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *cs_version(void);

/**
 * Length in bytes, without the terminator, of this thread's last error
 * message; zero after a successful call.
 */
size_t cs_last_error_length(void);

/**
 * Copies the last error message into `buf` and NUL-terminates it. With a
 * short buffer the message is truncated and `CS_STATUS_BUFFER_TOO_SMALL`
 * is returned.
 *
 * # Safety
 * `buf` must be valid for writes of `len` bytes.
 */
enum CsStatus cs_last_error_message(char *buf, size_t len);

/**
 * Builds the generator for scaled pump `lambda` and nonlinearity `g2` on a
 * basis with `n_max + 1` levels per mode.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum CsStatus cs_operator_new(double lambda, double g2, size_t n_max, struct CsOperator **out);

/**
 * Number of stored generator entries.
 *
 * # Safety
 * `op` is a live operator handle; `out` is valid for a write.
 */
enum CsStatus cs_operator_nnz(const struct CsOperator *op, size_t *out);

/**
 * # Safety
 * `op` is null or a handle from [`cs_operator_new`] not yet freed.
 */
void cs_operator_free(struct CsOperator *op);

/**
 * Two-mode vacuum `|00><00|`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum CsStatus cs_state_vacuum(size_t n_max, struct CsState **out);

/**
 * Number-state projector `|n1 n2><n1 n2|`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum CsStatus cs_state_fock(size_t n1, size_t n2, size_t n_max, struct CsState **out);

/**
 * Ideal circle state of radius `r0`.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
enum CsStatus cs_state_circle(double r0, size_t n_max, struct CsState **out);

/**
 * # Safety
 * `state` is null or a state handle not yet freed.
 */
void cs_state_free(struct CsState *state);

/**
 * Dimension `(n_max + 1)^2` of the two-mode basis; the density matrix has
 * `dim * dim` entries.
 *
 * # Safety
 * `state` is a live handle; `out` is valid for a write.
 */
enum CsStatus cs_state_dim(const struct CsState *state, size_t *out);

/**
 * Copies the density matrix as interleaved `(re, im)` pairs, row-major over
 * the basis `|n1 n2>` with `n1` outer. `len` counts doubles and must be at
 * least `2 * dim * dim`.
 *
 * # Safety
 * `state` is a live handle; `buf` is valid for writes of `len` doubles.
 */
enum CsStatus cs_state_copy_elements(const struct CsState *state, double *buf, size_t len);

/**
 * # Safety
 * `state` is a live handle; `re` and `im` are valid for writes.
 */
enum CsStatus cs_state_trace(const struct CsState *state, double *re, double *im);

/**
 * # Safety
 * `state` is a live handle; `out` is valid for a write.
 */
enum CsStatus cs_state_mean_photons(const struct CsState *state, enum CsMode mode, double *out);

/**
 * Integrates `initial` to scaled time `t_end` with classical RK4. `dt > 0`
 * fixes the step; `dt == 0` picks it from the generator. The result is a
 * new handle; `initial` is left untouched.
 *
 * # Safety
 * `op` and `initial` are live handles; `out` is valid for a pointer write.
 */
enum CsStatus cs_evolve(const struct CsOperator *op,
                        const struct CsState *initial,
                        double t_end,
                        double dt,
                        struct CsState **out);

/**
 * `<psi|rho|psi>` against the ideal circle state of radius `r0`.
 *
 * # Safety
 * `state` is a live handle; `out` is valid for a write.
 */
enum CsStatus cs_circle_fidelity(const struct CsState *state, double r0, double *out);

/**
 * Fidelity of the signal state, conditioned on the idler quadrature
 * `x = 0` at zero phase, against the even cat `|i beta> + |-i beta>`.
 *
 * # Safety
 * `state` is a live handle; `out` is valid for a write.
 */
enum CsStatus cs_conditional_cat_fidelity(const struct CsState *state, double beta, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CIRCLESTATE_H */
