#ifndef WEAKPOL_H
#define WEAKPOL_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Version of this interface; bumped on any incompatible change.
 */
#define WP_ABI_VERSION 1

typedef enum WpStatus {
  WP_STATUS_OK = 0,
  WP_STATUS_NULL_POINTER = 1,
  WP_STATUS_INVALID_ARGUMENT = 2,
  WP_STATUS_CONFIG = 3,
  WP_STATUS_POSTSELECTION_VANISHES = 4,
  WP_STATUS_DEGENERATE_DESIGN = 5,
  WP_STATUS_DIVERGENT = 6,
  WP_STATUS_INTERNAL = 7,
} WpStatus;

/**
 * Opaque experiment handle.
 */
typedef struct WpExperiment WpExperiment;

typedef struct WpComplex {
  double re;
  double im;
} WpComplex;

typedef struct WpKet {
  struct WpComplex h;
  struct WpComplex v;
} WpKet;

typedef struct WpStokes {
  double sx;
  double sy;
  double sz;
} WpStokes;

typedef struct WpCentroids {
  double mean_x;
  double mean_p;
  double probability;
} WpCentroids;

typedef struct WpCalibration {
  double a;
  double b;
  double c;
  double d;
  double residual_rms;
} WpCalibration;

typedef struct WpExp1Result {
  struct WpComplex weak_value;
  /**
   * Standard errors of the real and imaginary parts.
   */
  struct WpComplex std_error;
  struct WpKet ket;
  double nu;
  double fidelity;
} WpExp1Result;

typedef struct WpExp2Result {
  struct WpComplex dirac[4];
  struct WpComplex rho[4];
  double p_d;
  double p_a;
  struct WpStokes stokes;
  /**
   * NaN when the true state is mixed.
   */
  double fidelity;
  double trace_distance;
  double hermiticity_deviation;
  /**
   * Non-zero where an outcome's column was set to zero for lack of signal.
   */
  uint8_t low_signal[2];
} WpExp2Result;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Interface version implemented by this library.
 */
uint32_t wp_abi_version(void);

/**
 * Message for the last failure on this thread; empty after a success. The
 * pointer stays valid until the next call into this library on the thread.
 */
const char *wp_last_error(void);

/**
 * Jones image of |H⟩ through a half-wave plate at `hwp_deg` followed, when
 * `has_qwp` is non-zero, by a quarter-wave plate at `qwp_deg`.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `WpKet`.
 */
enum WpStatus wp_prepare(double hwp_deg, int32_t has_qwp, double qwp_deg, struct WpKet *out);

/**
 * Stokes vector of a density matrix.
 *
 * # Safety
 * `rho` must point to 4 readable values and `out` to one writable `WpStokes`.
 */
enum WpStatus wp_stokes(const struct WpComplex *rho, struct WpStokes *out);

/**
 * Weak value of projector `projector` post-selected on `outcome`. Returns
 * `Divergent` when the post-selection probability vanishes.
 *
 * # Safety
 * `rho` must point to 4 readable values and `out` to one writable `WpComplex`.
 */
enum WpStatus wp_weak_value(const struct WpComplex *rho,
                            uint32_t projector,
                            uint32_t outcome,
                            struct WpComplex *out);

/**
 * Dirac distribution of a density matrix.
 *
 * # Safety
 * `rho` must point to 4 readable values and `out` to 4 writable values.
 */
enum WpStatus wp_dirac_from_rho(const struct WpComplex *rho, struct WpComplex *out);

/**
 * Matrix reconstructed from a (possibly unphysical) Dirac distribution, and
 * the Frobenius norm of its anti-Hermitian part.
 *
 * # Safety
 * `dirac` must point to 4 readable values, `out` to 4 writable values, and
 * `hermiticity_deviation` must be null or writable.
 */
enum WpStatus wp_rho_from_dirac(const struct WpComplex *dirac,
                                struct WpComplex *out,
                                double *hermiticity_deviation);

/**
 * Closed-form post-selected pointer centroids for a Gaussian pointer of width
 * `sigma` whose H component is displaced by `delta`.
 *
 * # Safety
 * `rho` must point to 4 readable values and `out` to one writable `WpCentroids`.
 */
enum WpStatus wp_exact_centroids(const struct WpComplex *rho,
                                 uint32_t outcome_index,
                                 double sigma,
                                 double delta,
                                 struct WpCentroids *out);

/**
 * Creates an experiment from configuration text (TOML or JSON; null or empty
 * for defaults). Returns null on failure, with the reason in `*status` when
 * `status` is non-null.
 *
 * # Safety
 * `config_text` must be null or a NUL-terminated string; `status` must be
 * null or writable.
 */
struct WpExperiment *wp_experiment_new(const char *config_text, enum WpStatus *status);

/**
 * Releases an experiment handle; null is ignored.
 *
 * # Safety
 * `exp` must be null or a handle from [`wp_experiment_new`] not yet freed.
 */
void wp_experiment_free(struct WpExperiment *exp);

/**
 * Calibration constants the experiment uses for `outcome`.
 *
 * # Safety
 * `exp` must be a live handle and `out` writable.
 */
enum WpStatus wp_experiment_calibration(const struct WpExperiment *exp,
                                        uint32_t outcome_index,
                                        struct WpCalibration *out);

/**
 * Experiment 1 on a pure state.
 *
 * # Safety
 * `exp` must be a live handle, `state` readable and `out` writable.
 */
enum WpStatus wp_experiment_run_exp1(const struct WpExperiment *exp,
                                     const struct WpKet *state,
                                     struct WpExp1Result *out);

/**
 * Experiment 2 on a density matrix.
 *
 * # Safety
 * `exp` must be a live handle, `rho` must point to 4 readable values and
 * `out` must be writable.
 */
enum WpStatus wp_experiment_run_exp2(const struct WpExperiment *exp,
                                     const struct WpComplex *rho,
                                     struct WpExp2Result *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEAKPOL_H */
