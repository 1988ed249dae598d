#ifndef HMF_H
#define HMF_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum HmfStatus {
  HMF_STATUS_OK = 0,
  HMF_STATUS_NULL_POINTER = 1,
  HMF_STATUS_INVALID_ARGUMENT = 2,
  // A numerical precondition failed (separatrix, no root, support, ...).
  HMF_STATUS_NUMERICAL = 3,
  HMF_STATUS_IO = 4,
  // A malformed grid file.
  HMF_STATUS_FORMAT = 5,
  HMF_STATUS_PANIC = 6,
} HmfStatus;

// Self-consistent steady state.
typedef struct HmfEquilibrium HmfEquilibrium;

// Phase-space grid, θ-major.
typedef struct HmfGrid HmfGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *hmf_last_error(void);

// Library version, a static NUL-terminated string.
const char *hmf_version(void);

// Period of the pendulum orbit of energy `e0` in the well of depth `m0`.
//
// # Safety
// `out` must be null or valid for writes.
enum HmfStatus hmf_pendulum_period(double m0, double e0, double *out);

// Steady state with profile `A exp(-1/(e_star - e))`, `A` chosen so that
// the magnetization is `m0`.
//
// # Safety
// `out` must be null or valid for writes.
enum HmfStatus hmf_equilibrium_new_bump(double e_star, double m0, struct HmfEquilibrium **out);

// Steady state with a smooth step at `e_sharp` of width `scale` plus an
// `epsilon` bump cut off at `e_star`.
//
// # Safety
// `out` must be null or valid for writes.
enum HmfStatus hmf_equilibrium_new_step(double e_sharp,
                                        double scale,
                                        double e_star,
                                        double epsilon,
                                        double m0,
                                        struct HmfEquilibrium **out);

// # Safety
// `eq` must be null or a handle from `hmf_equilibrium_new_*` not yet freed.
void hmf_equilibrium_free(struct HmfEquilibrium *eq);

// Magnetization and normalized profile amplitude.
//
// # Safety
// `eq` must be a live handle; the outputs must be null or valid for writes.
enum HmfStatus hmf_equilibrium_info(const struct HmfEquilibrium *eq, double *m0, double *amplitude);

// The instability criterion κ on an `n_theta x n_v` quadrature.
//
// # Safety
// `eq` must be a live handle; `out` must be null or valid for writes.
enum HmfStatus hmf_kappa(const struct HmfEquilibrium *eq, size_t n_theta, size_t n_v, double *out);

// The dispersion function `G(lambda)`.
//
// # Safety
// `eq` must be a live handle; `out` must be null or valid for writes.
enum HmfStatus hmf_dispersion(const struct HmfEquilibrium *eq, double lambda, double *out);

// Root of `G` on `(0, lambda_max]`. `*found` is set to 1 with the root in
// `*lambda_star`, or to 0 when `G` shows no sign change.
//
// # Safety
// `eq` must be a live handle; the outputs must be null or valid for writes.
enum HmfStatus hmf_growth_rate(const struct HmfEquilibrium *eq,
                               double lambda_max,
                               double *lambda_star,
                               int32_t *found);

// Unstable eigenmode for the root `lambda_star` on an `n_theta x n_v` grid
// over `[-v_max, v_max]`.
//
// # Safety
// `eq` must be a live handle; `out` must be null or valid for writes.
enum HmfStatus hmf_eigenmode(const struct HmfEquilibrium *eq,
                             double lambda_star,
                             size_t n_theta,
                             size_t n_v,
                             double v_max,
                             struct HmfGrid **out);

// Reads a grid file.
//
// # Safety
// `path` must be null or a NUL-terminated string; `out` must be null or
// valid for writes.
enum HmfStatus hmf_grid_read(const char *path, struct HmfGrid **out);

// Writes a grid file.
//
// # Safety
// `grid` must be a live handle; `path` must be null or NUL-terminated.
enum HmfStatus hmf_grid_write(const struct HmfGrid *grid, const char *path);

// Grid dimensions and velocity bound.
//
// # Safety
// `grid` must be a live handle; the outputs must be null or valid for writes.
enum HmfStatus hmf_grid_shape(const struct HmfGrid *grid,
                              size_t *n_theta,
                              size_t *n_v,
                              double *v_max);

// Pointer to the `n_theta * n_v` values, θ-major, owned by the grid. Null
// if `grid` is null.
//
// # Safety
// `grid` must be null or a live handle.
const double *hmf_grid_values(const struct HmfGrid *grid);

// # Safety
// `grid` must be null or a handle not yet freed.
void hmf_grid_free(struct HmfGrid *grid);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HMF_H */
