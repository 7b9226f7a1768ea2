#ifndef RYDCONV_H
#define RYDCONV_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Scalar parameters reachable through [`rc_params_get`] / [`rc_params_set`].
 * The derived entries are read-only.
 */
typedef enum RcParam {
  RC_PARAM_DELTA_INTERMEDIATE = 0,
  RC_PARAM_DELTA_E = 1,
  RC_PARAM_OMEGA_D = 2,
  RC_PARAM_GAMMA_E = 3,
  RC_PARAM_GAMMA_S = 4,
  RC_PARAM_GAMMA_I = 5,
  RC_PARAM_STARK_GRADIENT = 6,
  RC_PARAM_SURFACE_POSITION = 7,
  RC_PARAM_DRIVE_TILT = 8,
  RC_PARAM_ADIABATIC_RATIO = 9,
  RC_PARAM_GAMMA = 100,
  RC_PARAM_ETA0 = 101,
  RC_PARAM_FIELD_PER_PHOTON = 102,
  RC_PARAM_TRANSITION_FREQUENCY = 103,
  RC_PARAM_CAVITY_FREQUENCY = 104,
} RcParam;

typedef enum RcStatus {
  RC_STATUS_OK = 0,
  RC_STATUS_NULL_POINTER = 1,
  RC_STATUS_INVALID_ARGUMENT = 2,
  RC_STATUS_BUFFER_TOO_SMALL = 3,
  RC_STATUS_DOMAIN = 4,
  RC_STATUS_STEP_UNDERFLOW = 5,
  RC_STATUS_ORACLE_CAP = 6,
  RC_STATUS_FIT_DIVERGENCE = 7,
  RC_STATUS_UNFITTED = 8,
  RC_STATUS_SHAPING_DENOMINATOR = 9,
  RC_STATUS_EMPTY_ENVELOPE = 10,
  RC_STATUS_CONFIG = 11,
  RC_STATUS_PARSE = 12,
  RC_STATUS_IO = 13,
  RC_STATUS_PANIC = 14,
} RcStatus;

typedef struct RcCloud RcCloud;

typedef struct RcParams RcParams;

typedef struct RcPulse RcPulse;

typedef struct RcTrajectory RcTrajectory;

/**
 * Emission observables on the reference angular grid. Angles in rad.
 */
typedef struct RcEmissionSummary {
  double p_delta_omega;
  double p_delta_omega_absolute;
  double p_total_emitted;
  double theta_x0;
  double theta_y0;
  double width_x;
  double width_y;
  double fit_residual;
  uint64_t density_rank;
} RcEmissionSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next `rc_*` call on the same thread.
 */
const char *rc_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rc_version(void);

/**
 * Reference parameter set.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum RcStatus rc_params_reference(struct RcParams **out);

/**
 * # Safety
 * `params` must be null or a handle from `rc_params_*`; `out` as above.
 */
enum RcStatus rc_params_clone(const struct RcParams *params, struct RcParams **out);

/**
 * # Safety
 * `params` must be null or a handle not yet freed.
 */
void rc_params_free(struct RcParams *params);

/**
 * # Safety
 * `params` must be a live handle and `out` writable.
 */
enum RcStatus rc_params_get(const struct RcParams *params, enum RcParam key, double *out);

/**
 * Sets one parameter. The change is rolled back if the result fails
 * validation.
 *
 * # Safety
 * `params` must be a live handle.
 */
enum RcStatus rc_params_set(struct RcParams *params, enum RcParam key, double value);

/**
 * Reference pump pulse.
 *
 * # Safety
 * `out` must be writable.
 */
enum RcStatus rc_pulse_reference(struct RcPulse **out);

/**
 * Ω_0·½[1 + erf((t − t0)/(√2 σ_t))] on [0, t_end].
 *
 * # Safety
 * `out` must be writable.
 */
enum RcStatus rc_pulse_erf(double omega0,
                           double t0,
                           double sigma_t,
                           double t_end,
                           struct RcPulse **out);

/**
 * Linearly interpolated pulse from `len` samples.
 *
 * # Safety
 * `times`, `re` and `im` must each point to `len` readable doubles.
 */
enum RcStatus rc_pulse_tabulated(const double *times,
                                 const double *re,
                                 const double *im,
                                 size_t len,
                                 struct RcPulse **out);

/**
 * # Safety
 * `pulse` must be a live handle; `re` and `im` writable.
 */
enum RcStatus rc_pulse_value(const struct RcPulse *pulse, double t, double *re, double *im);

/**
 * # Safety
 * `pulse` must be null or a handle not yet freed.
 */
void rc_pulse_free(struct RcPulse *pulse);

/**
 * Gaussian cloud with standard deviations `sigma[0..3]` (m).
 *
 * # Safety
 * `params` must be a live handle, `sigma` must point to three doubles and
 * `out` must be writable.
 */
enum RcStatus rc_cloud_sample(const struct RcParams *params,
                              const double *sigma,
                              size_t n_atoms,
                              uint64_t seed,
                              struct RcCloud **out);

/**
 * # Safety
 * `cloud` must be null or a live handle.
 */
size_t rc_cloud_len(const struct RcCloud *cloud);

/**
 * Copies positions as x0 y0 z0 x1 ... (3·N doubles).
 *
 * # Safety
 * `cloud` must be a live handle and `xyz` must hold `len` doubles.
 */
enum RcStatus rc_cloud_positions(const struct RcCloud *cloud, double *xyz, size_t len);

/**
 * # Safety
 * `cloud` must be null or a handle not yet freed.
 */
void rc_cloud_free(struct RcCloud *cloud);

/**
 * β = Σ_j η_j²/Δ² · 1/(γ − iδ̃_j) as (re, im) in s.
 *
 * # Safety
 * Handles must be live; `re` and `im` writable.
 */
enum RcStatus rc_beta(const struct RcParams *params,
                      const struct RcCloud *cloud,
                      double *re,
                      double *im);

/**
 * Reduced-model evolution on `points` uniform output times.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum RcStatus rc_evolve(const struct RcParams *params,
                        const struct RcCloud *cloud,
                        const struct RcPulse *pulse,
                        size_t points,
                        struct RcTrajectory **out);

/**
 * Full-model evolution including |i⟩; small ensembles only.
 *
 * # Safety
 * Handles must be live; `out` writable.
 */
enum RcStatus rc_evolve_full(const struct RcParams *params,
                             const struct RcCloud *cloud,
                             const struct RcPulse *pulse,
                             size_t points,
                             struct RcTrajectory **out);

/**
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t rc_trajectory_len(const struct RcTrajectory *traj);

/**
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t rc_trajectory_n_atoms(const struct RcTrajectory *traj);

/**
 * # Safety
 * `traj` must be a live handle and `out` must hold `len` doubles.
 */
enum RcStatus rc_trajectory_times(const struct RcTrajectory *traj, double *out, size_t len);

/**
 * Σ_j |b_j|² at every output time.
 *
 * # Safety
 * `traj` must be a live handle and `out` must hold `len` doubles.
 */
enum RcStatus rc_trajectory_excited(const struct RcTrajectory *traj, double *out, size_t len);

/**
 * State norm |b0|² + Σ|c_j|² + Σ|b_j|²; decayed probability is not included.
 *
 * # Safety
 * `traj` must be a live handle and `out` must hold `len` doubles.
 */
enum RcStatus rc_trajectory_norm(const struct RcTrajectory *traj, double *out, size_t len);

/**
 * b0(t).
 *
 * # Safety
 * `traj` must be a live handle; `re` and `im` must hold `len` doubles.
 */
enum RcStatus rc_trajectory_b0(const struct RcTrajectory *traj, double *re, double *im, size_t len);

/**
 * b_j at output index `t_index` for all atoms.
 *
 * # Safety
 * `traj` must be a live handle; `re` and `im` must hold `len` doubles.
 */
enum RcStatus rc_trajectory_emitter(const struct RcTrajectory *traj,
                                    size_t t_index,
                                    double *re,
                                    double *im,
                                    size_t len);

/**
 * # Safety
 * `traj` must be null or a handle not yet freed.
 */
void rc_trajectory_free(struct RcTrajectory *traj);

/**
 * Angular map, Gaussian fit and phase-matched fraction on the reference
 * angular grid.
 *
 * # Safety
 * Handles must be live and belong together; `out` writable.
 */
enum RcStatus rc_emission_summary(const struct RcParams *params,
                                  const struct RcCloud *cloud,
                                  const struct RcTrajectory *traj,
                                  struct RcEmissionSummary *out);

/**
 * Runs a scenario file. `output_dir` may be null to use the directory named
 * in the file. `summary_path` (optional) receives the NUL-terminated path of
 * `summary.json`, truncated to `summary_path_len` bytes.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `output_dir` null or one;
 * `summary_path` null or writable for `summary_path_len` bytes.
 */
enum RcStatus rc_run_scenario(const char *config_path,
                              const char *output_dir,
                              char *summary_path,
                              size_t summary_path_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RYDCONV_H */
