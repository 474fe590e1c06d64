#ifndef QHJ_H
#define QHJ_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QhjStatus {
  QHJ_STATUS_OK = 0,
  QHJ_STATUS_NULL_POINTER = 1,
  QHJ_STATUS_INVALID_PARAMETER = 2,
  QHJ_STATUS_GRID_MISMATCH = 3,
  QHJ_STATUS_DOMAIN_TRUNCATION = 4,
  QHJ_STATUS_NON_FINITE = 5,
  QHJ_STATUS_NO_CONVERGENCE = 6,
  QHJ_STATUS_CAUSTIC = 7,
  QHJ_STATUS_DEGENERATE_QUADRATIC = 8,
  QHJ_STATUS_UNSUPPORTED_POTENTIAL = 9,
  QHJ_STATUS_ALIASING = 10,
  QHJ_STATUS_ORACLE_NOT_CONVERGED = 11,
  QHJ_STATUS_POISSON_BRACKET = 12,
  QHJ_STATUS_CONFIG = 13,
  QHJ_STATUS_IO = 14,
  QHJ_STATUS_PANIC = 15,
  QHJ_STATUS_CHECKS_FAILED = 16,
} QhjStatus;

typedef struct QhjGenerating QhjGenerating;

typedef struct QhjPotential QhjPotential;

typedef struct QhjPropagator QhjPropagator;

typedef struct QhjWaveFunction QhjWaveFunction;

typedef struct QhjOracleReport {
  double l2_error;
  double phase_aligned_l2;
  double fidelity;
  double norm_kernel;
  double norm_oracle;
  size_t oracle_steps;
} QhjOracleReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failing call on this thread, or null.
 */
const char *qhj_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qhj_version(void);

/**
 * `V = omega^2 q^2 / 2`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QhjStatus qhj_potential_harmonic(double omega, struct QhjPotential **out);

/**
 * `V = -a q`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QhjStatus qhj_potential_constant_force(double a, struct QhjPotential **out);

/**
 * `V = sum_k coeffs[k] q^k`.
 *
 * # Safety
 * `coeffs` must point to `n` doubles and `out` must be valid.
 */
enum QhjStatus qhj_potential_polynomial(const double *coeffs, size_t n, struct QhjPotential **out);

/**
 * # Safety
 * `p` must come from a `qhj_potential_*` constructor or be null.
 */
void qhj_potential_free(struct QhjPotential *p);

/**
 * Gaussian packet on the grid `[x_min, x_max]` with `n` points.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QhjStatus qhj_wavefunction_gaussian(double x_min,
                                         double x_max,
                                         size_t n,
                                         double q0,
                                         double p0,
                                         double width,
                                         double hbar,
                                         struct QhjWaveFunction **out);

/**
 * # Safety
 * `psi` must be a live handle.
 */
size_t qhj_wavefunction_len(const struct QhjWaveFunction *psi);

/**
 * Copy the amplitudes into `re` and `im`, each of length `n`.
 *
 * # Safety
 * `psi` must be live; `re` and `im` must hold `n` doubles.
 */
enum QhjStatus qhj_wavefunction_amplitudes(const struct QhjWaveFunction *psi,
                                           double *re,
                                           double *im,
                                           size_t n);

/**
 * # Safety
 * `psi` must come from this library or be null.
 */
void qhj_wavefunction_free(struct QhjWaveFunction *psi);

/**
 * Closed-form generating function of type `tag` (1..4) for a potential of
 * degree at most two.
 *
 * # Safety
 * `potential` must be live and `out` valid.
 */
enum QhjStatus qhj_generating_closed_form(const struct QhjPotential *potential,
                                          int32_t tag,
                                          double t,
                                          double hbar,
                                          struct QhjGenerating **out);

/**
 * Convert to type `tag` (1..4).
 *
 * # Safety
 * `f` must be live and `out` valid.
 */
enum QhjStatus qhj_generating_convert(const struct QhjGenerating *f,
                                      int32_t tag,
                                      struct QhjGenerating **out);

/**
 * Write `alpha, beta, gamma, lin_x, lin_y, constant` as twelve doubles
 * (real and imaginary parts interleaved).
 *
 * # Safety
 * `f` must be live and `coeffs` must hold 12 doubles.
 */
enum QhjStatus qhj_generating_coefficients(const struct QhjGenerating *f, double *coeffs);

/**
 * # Safety
 * `f` must come from this library or be null.
 */
void qhj_generating_free(struct QhjGenerating *f);

/**
 * Closed-form propagator at time `t` on a square grid.
 *
 * # Safety
 * `potential` must be live and `out` valid.
 */
enum QhjStatus qhj_propagator_closed_form(const struct QhjPotential *potential,
                                          double t,
                                          double hbar,
                                          double x_min,
                                          double x_max,
                                          size_t n,
                                          struct QhjPropagator **out);

/**
 * `out = K psi`.
 *
 * # Safety
 * `k`, `psi` must be live and `out` valid.
 */
enum QhjStatus qhj_propagator_apply(const struct QhjPropagator *k,
                                    const struct QhjWaveFunction *psi,
                                    struct QhjWaveFunction **out);

/**
 * # Safety
 * `k` must come from this library or be null.
 */
void qhj_propagator_free(struct QhjPropagator *k);

/**
 * Compare `K psi` with the split-step evolution of `psi`.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum QhjStatus qhj_compare_oracle(const struct QhjPotential *potential,
                                  const struct QhjPropagator *k,
                                  const struct QhjWaveFunction *psi,
                                  struct QhjOracleReport *out);

/**
 * Heisenberg solution `[A, B, C, D, shift_q, shift_p]` at time `t`.
 *
 * # Safety
 * `potential` must be live and `coeffs` must hold 6 doubles.
 */
enum QhjStatus qhj_heisenberg(const struct QhjPotential *potential,
                              double t,
                              double hbar,
                              double *coeffs);

/**
 * Run a scenario configuration file. `out_dir` may be null to use the
 * configured directory. Returns `ChecksFailed` when the run completed but
 * a built-in check failed.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `out_dir` likewise or null.
 */
enum QhjStatus qhj_run_config(const char *config_path, const char *out_dir, uint64_t seed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QHJ_H */
