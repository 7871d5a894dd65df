/*
 * C interface to the calabi torus laboratory.
 * Generated by cbindgen from crates/calabi-ffi; do not edit by hand.
 */

#ifndef CALABI_H
#define CALABI_H



#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of entries `calabi_run_checks` writes.
 */
#define CALABI_CHECK_COUNT 7

/**
 * Identity and inequality checks, in the order `calabi_run_checks`
 * reports them.
 */
enum CalabiCheckKind
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  CALABI_CHECK_KIND_LAPLACE_OF_VOLUME_RATIO = 0,
  CALABI_CHECK_KIND_DUAL_LAPLACE_OF_VOLUME_RATIO = 1,
  CALABI_CHECK_KIND_RICCI_DIFFERENCE = 2,
  CALABI_CHECK_KIND_GREENS_REPRESENTATION = 3,
  CALABI_CHECK_KIND_ARITHMETIC_GEOMETRIC_MEANS = 4,
  CALABI_CHECK_KIND_JENSEN_MEAN = 5,
  CALABI_CHECK_KIND_ENERGY_DECOMPOSITION = 6,
};
#ifndef __cplusplus
typedef int32_t CalabiCheckKind;
#endif // __cplusplus

/**
 * How a flow run ended.
 */
enum CalabiFlowOutcome
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  /**
   * Energy dropped below the configured stop threshold.
   */
  CALABI_FLOW_OUTCOME_CONVERGED = 0,
  /**
   * The curvature monitor latched an exit.
   */
  CALABI_FLOW_OUTCOME_MONITOR_EXIT = 2,
  /**
   * The time horizon was reached first.
   */
  CALABI_FLOW_OUTCOME_T_MAX_REACHED = 3,
};
#ifndef __cplusplus
typedef int32_t CalabiFlowOutcome;
#endif // __cplusplus

/**
 * Status code returned by every fallible entry point.
 */
enum CalabiStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  /**
   * Success; output parameters are filled.
   */
  CALABI_STATUS_OK = 0,
  /**
   * A required pointer was null.
   */
  CALABI_STATUS_NULL_ARGUMENT = 1,
  /**
   * Arguments outside the supported range (domain size, wavevectors,
   * configuration values).
   */
  CALABI_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The potential leaves the space of admissible metrics.
   */
  CALABI_STATUS_NOT_KAHLER = 3,
  /**
   * The computation broke down numerically (non-finite values, step
   * size underflow).
   */
  CALABI_STATUS_NUMERICAL = 4,
  /**
   * A panic or an unexpected internal failure; see the error message.
   */
  CALABI_STATUS_INTERNAL = 5,
};
#ifndef __cplusplus
typedef int32_t CalabiStatus;
#endif // __cplusplus

/**
 * Opaque: a validated torus grid (dimension, resolution, periods, FFT
 * plans). Thread-safe to share behind const pointers.
 */
typedef struct CalabiDomain CalabiDomain;

/**
 * Opaque: a Kähler potential on its domain.
 */
typedef struct CalabiPotential CalabiPotential;

/**
 * The energy decomposition of one metric: total Calabi energy, the Ricci
 * deviation term, and the class-level correction (zero on tori).
 */
typedef struct CalabiEnergyReport {
  double calabi;
  double ricci_deviation;
  double psi;
  /**
   * calabi - ricci_deviation - psi; zero up to quadrature.
   */
  double decomposition_residual;
  double mu;
  /**
   * Threshold on |decomposition_residual| behind `pass`.
   */
  double tolerance;
  bool pass;
} CalabiEnergyReport;

/**
 * One identity-check verdict.
 */
typedef struct CalabiCheckResult {
  /**
   * Which check this row reports (a `CalabiCheckKind` value).
   */
  int32_t kind;
  /**
   * Supremum of the pointwise residual (for inequalities: the worst
   * violation, zero when the inequality holds everywhere).
   */
  double residual_sup;
  /**
   * L2 average of the residual.
   */
  double residual_l2;
  /**
   * Threshold the supremum was compared against.
   */
  double tolerance;
  /**
   * Whether the check passed.
   */
  bool pass;
} CalabiCheckResult;

/**
 * Adaptive flow parameters; obtain defaults from
 * `calabi_flow_config_default` and override selectively.
 */
typedef struct CalabiFlowConfig {
  double dt_init;
  double dt_min;
  double dt_max;
  double dt_growth;
  double t_max;
  double stop_ca;
  double ca_slack;
  uint32_t warmup_steps;
  double monitor_factor;
} CalabiFlowConfig;

/**
 * What a finished flow run reports.
 */
typedef struct CalabiFlowSummary {
  /**
   * A `CalabiFlowOutcome` value.
   */
  int32_t outcome;
  double initial_calabi;
  double final_calabi;
  double t_final;
  uint64_t steps_accepted;
  uint64_t steps_rejected;
  /**
   * Supremum of the final potential.
   */
  double sup_phi;
  /**
   * Largest relative drift of the total volume along the run.
   */
  double volume_drift;
  /**
   * Final average of scalar curvature against the evolving volume form.
   */
  double mean_scalar;
  /**
   * Monitor state: 0 warmup, 1 inside, 2 exited above, 3 exited below.
   */
  int32_t monitor_status;
  /**
   * Reference bounds fixed by the warmup window; NaN while warming up.
   */
  double monitor_k3;
  double monitor_k4;
} CalabiFlowSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the message of the most recent failure on this thread into
 * `buffer` (NUL-terminated, truncated to `capacity`). Returns the number
 * of bytes the full message needs including the terminator, or 0 when the
 * last call on this thread succeeded. `buffer` may be null to query the
 * required capacity.
 */
size_t calabi_last_error(char *buffer, size_t capacity);

/**
 * Static version string of this library; never null.
 */
const char *calabi_version(void);

/**
 * Builds a torus: `n` complex dimensions (1 or 2), `2n` real axes of
 * `size` grid points each, axis lengths in `periods` (length `2n`).
 */
CalabiStatus calabi_domain_new(uint32_t n,
                               uint32_t size,
                               const double *periods,
                               size_t periods_len,
                               struct CalabiDomain **out);

/**
 * Releases a domain handle. Null is a no-op.
 */
void calabi_domain_free(struct CalabiDomain *domain);

/**
 * Number of real axes (twice the complex dimension).
 */
CalabiStatus calabi_domain_axes(const struct CalabiDomain *domain, size_t *out);

/**
 * Total number of grid points.
 */
CalabiStatus calabi_domain_points(const struct CalabiDomain *domain, size_t *out);

/**
 * Decay rate of one linearized mode; `wavevector` has one entry per axis.
 */
CalabiStatus calabi_linearized_rate(const struct CalabiDomain *domain,
                                    const int64_t *wavevector,
                                    size_t wavevector_len,
                                    double *out);

/**
 * Synthesizes a potential from cosine modes. `wavevectors` holds
 * `mode_count` rows of one entry per axis (row-major); `amplitudes` holds
 * `mode_count` values. The result is mean-free.
 */
CalabiStatus calabi_potential_from_modes(const struct CalabiDomain *domain,
                                         const int64_t *wavevectors,
                                         const double *amplitudes,
                                         size_t mode_count,
                                         struct CalabiPotential **out);

/**
 * Wraps raw grid values (length = `calabi_domain_points`) as a potential.
 */
CalabiStatus calabi_potential_from_values(const struct CalabiDomain *domain,
                                          const double *values,
                                          size_t values_len,
                                          struct CalabiPotential **out);

/**
 * Releases a potential handle. Null is a no-op.
 */
void calabi_potential_free(struct CalabiPotential *potential);

/**
 * Supremum norm of the potential's grid values.
 */
CalabiStatus calabi_potential_sup_norm(const struct CalabiPotential *potential, double *out);

/**
 * Evaluates the energy decomposition of the metric induced by
 * `potential` against its torus class (so `mu` and `psi` are zero).
 */
CalabiStatus calabi_energy_report(const struct CalabiPotential *potential,
                                  struct CalabiEnergyReport *out);

/**
 * Runs every identity and inequality check of the metric induced by
 * `potential` against the flat metric, writing `CALABI_CHECK_COUNT`
 * entries to `results` in `CalabiCheckKind` order. The call succeeds even
 * when individual checks fail; inspect the `pass` flags.
 */
CalabiStatus calabi_run_checks(const struct CalabiPotential *potential,
                               double residual_tolerance,
                               double margin_tolerance,
                               struct CalabiCheckResult *results);

/**
 * Fills `out` with the default adaptive-flow parameters.
 */
CalabiStatus calabi_flow_config_default(struct CalabiFlowConfig *out);

/**
 * Evolves the potential under the flow with mean curvature
 * `mean_curvature` until convergence, a monitor exit, or the horizon.
 * The potential handle itself is not modified.
 */
CalabiStatus calabi_flow_run(const struct CalabiPotential *potential,
                             double mean_curvature,
                             const struct CalabiFlowConfig *config,
                             struct CalabiFlowSummary *out);

/**
 * Class-level quantities from intersection pairings: the mean scalar
 * curvature `mu` and the energy-decomposition correction `psi`.
 */
CalabiStatus calabi_class_quantities(uint32_t n,
                                     double c1_pairing,
                                     double c1_squared_pairing,
                                     double volume,
                                     double *mu_out,
                                     double *psi_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CALABI_H */
