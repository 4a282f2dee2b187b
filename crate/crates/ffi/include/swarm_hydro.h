#ifndef SWARM_HYDRO_H
#define SWARM_HYDRO_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result codes. Values are stable.
typedef enum ShStatus {
  SH_STATUS_OK = 0,
  SH_STATUS_NULL_POINTER = 1,
  SH_STATUS_INVALID_INPUT = 2,
  SH_STATUS_CONFIG = 3,
  SH_STATUS_IO = 4,
  SH_STATUS_NON_MONOTONE = 10,
  SH_STATUS_NO_INTERIOR_CRITICAL_POINT = 11,
  SH_STATUS_MISSING_THIRD_DERIVATIVE = 12,
  SH_STATUS_TRUNCATION = 13,
  SH_STATUS_MULTIPLE_MAXIMA = 14,
  SH_STATUS_PLATEAU = 15,
  SH_STATUS_NO_SIGN_CHANGE = 16,
  SH_STATUS_DEGENERATE_HESSIAN = 17,
  SH_STATUS_FLAT_SECOND_DERIVATIVE = 18,
  SH_STATUS_SINGULAR_SYSTEM = 19,
  SH_STATUS_INCOMPATIBLE = 20,
  SH_STATUS_ZERO_DENOMINATOR = 21,
  SH_STATUS_LOW_ACCEPTANCE = 22,
  SH_STATUS_NUMERICAL_BLOWUP = 23,
  SH_STATUS_STEP_TOO_LARGE = 24,
  SH_STATUS_PANIC = 99,
} ShStatus;

// Opaque radial potential.
typedef struct ShPotential ShPotential;

// Opaque order-parameter time series.
typedef struct ShSeries ShSeries;

// A scalar callback `f(r, user_data)`.
typedef double (*ShRadialCallback)(double r, void *user_data);

// Partition function and moments at `(d, sigma, l)` with the default quadrature.
typedef struct ShPartition {
  double z;
  double log_z;
  // `<v.Omega - l>`.
  double h;
  double dz_dl;
  double d2z_dll;
  double lambda_par;
  double lambda_perp;
} ShPartition;

// Hydrodynamic constants and intermediate integrals.
typedef struct ShCoefficients {
  double c_perp;
  double c_par;
  double c_par_prime;
  double c_perp1;
  double c_perp2;
  double c_par1;
  double c_par2;
  double c_par3;
} ShCoefficients;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *sh_version(void);

// Message of the last failure on this thread; empty after a success.
// Valid until the next library call on the same thread.
const char *sh_last_error_message(void);

// `V = 0`.
//
// # Safety
// `out` must be a valid pointer.
enum ShStatus sh_potential_zero(struct ShPotential **out);

// `V(r) = beta r^4/4 - alpha r^2/2` with `alpha, beta > 0`.
//
// # Safety
// `out` must be a valid pointer.
enum ShStatus sh_potential_quartic(double alpha, double beta, struct ShPotential **out);

// Parses `zero` or `quartic:alpha=A,beta=B`.
//
// # Safety
// `spec` must be NUL-terminated; `out` must be a valid pointer.
enum ShStatus sh_potential_parse(const char *spec, struct ShPotential **out);

// Potential given by callbacks for `V, V', V''` and optionally `V'''` (may be NULL).
//
// The callbacks may be invoked concurrently from several threads and must
// stay valid, together with `user_data`, until the handle is freed.
//
// # Safety
// `label` must be NUL-terminated; the callbacks must be sound to call with `user_data`.
enum ShStatus sh_potential_custom(const char *label,
                                  ShRadialCallback value,
                                  ShRadialCallback d1,
                                  ShRadialCallback d2,
                                  ShRadialCallback d3,
                                  void *user_data,
                                  struct ShPotential **out);

// # Safety
// `pot` must come from an `sh_potential_*` constructor and not be used afterwards.
void sh_potential_free(struct ShPotential *pot);

// The unique `r` with `r + V'(r) = l`.
//
// # Safety
// Pointers must be valid.
enum ShStatus sh_speed_map_inverse(const struct ShPotential *pot, double l, double *out);

// Interior critical point `r0` of `V`.
//
// # Safety
// Pointers must be valid.
enum ShStatus sh_r0(const struct ShPotential *pot, double *out);

// # Safety
// Pointers must be valid.
enum ShStatus sh_partition(const struct ShPotential *pot,
                           uintptr_t d,
                           double sigma,
                           double l,
                           struct ShPartition *out);

// Equilibrium order parameter `l(sigma)` (0 in the disordered phase).
//
// # Safety
// Pointers must be valid.
enum ShStatus sh_find_l_star(const struct ShPotential *pot, uintptr_t d, double sigma, double *out);

// Critical diffusion over the default bracket.
//
// # Safety
// Pointers must be valid.
enum ShStatus sh_find_sigma0(const struct ShPotential *pot, uintptr_t d, double *out);

// `lim (l(sigma) - r0)/sigma` as `sigma -> 0`.
//
// # Safety
// Pointers must be valid.
enum ShStatus sh_small_sigma_slope(const struct ShPotential *pot, uintptr_t d, double *out);

// Fills `l_out[0..n]` with `l(sigmas[i])` and `*sigma0` with the critical diffusion.
//
// # Safety
// `sigmas` and `l_out` must hold `n` values; pointers must be valid.
enum ShStatus sh_phase_sweep(const struct ShPotential *pot,
                             uintptr_t d,
                             const double *sigmas,
                             uintptr_t n,
                             double *l_out,
                             double *sigma0);

// Solves both invariants on an `n_theta x n_r` mesh at `(d, sigma, l)`.
// A negative `l` selects the equilibrium order parameter `l(sigma)`.
//
// # Safety
// Pointers must be valid.
enum ShStatus sh_coefficients(const struct ShPotential *pot,
                              uintptr_t d,
                              double sigma,
                              double l,
                              uintptr_t n_theta,
                              uintptr_t n_r,
                              struct ShCoefficients *out);

// Mean-field particle run from an ordered equilibrium start.
//
// # Safety
// Pointers must be valid.
enum ShStatus sh_simulate(const struct ShPotential *pot,
                          uintptr_t d,
                          double sigma,
                          uintptr_t n,
                          double t_final,
                          double dt,
                          uintptr_t record_every,
                          uint64_t seed,
                          struct ShSeries **out);

// Number of records.
//
// # Safety
// `series` must be a live handle or NULL (returns 0).
uintptr_t sh_series_len(const struct ShSeries *series);

// Copies `min(len, cap)` times and `|u|` values; `dirs` (may be NULL) receives
// `min(len, cap) x d` direction components row by row.
//
// # Safety
// Buffers must hold `cap` values (`cap * d` for `dirs`).
enum ShStatus sh_series_copy(const struct ShSeries *series,
                             double *times,
                             double *u_mod,
                             double *dirs,
                             uintptr_t cap,
                             uintptr_t *written);

// Time average of `|u|` after `from_fraction` of the run, with its
// batch-means standard error.
//
// # Safety
// Pointers must be valid.
enum ShStatus sh_series_time_average(const struct ShSeries *series,
                                     double from_fraction,
                                     double *mean,
                                     double *stderr);

// # Safety
// `series` must come from [`sh_simulate`] and not be used afterwards.
void sh_series_free(struct ShSeries *series);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWARM_HYDRO_H */
