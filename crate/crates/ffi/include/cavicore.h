#ifndef CAVICORE_H
#define CAVICORE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CavStatus {
  CAV_STATUS_OK = 0,
  CAV_STATUS_INVALID_ARGUMENT = 1,
  CAV_STATUS_SINGULAR_MATRIX = 2,
  CAV_STATUS_INVALID_FLAW_CONFIG = 3,
  CAV_STATUS_OUTSIDE_DOMAIN = 4,
  CAV_STATUS_SINGULAR_POINT = 5,
  CAV_STATUS_NEAR_BOUNDARY = 6,
  CAV_STATUS_NUMERICAL = 7,
  CAV_STATUS_IO = 8,
  CAV_STATUS_NULL_POINTER = 9,
  CAV_STATUS_PANIC = 10,
} CavStatus;

/**
 * Opaque deformation handle.
 */
typedef struct CavDeformation CavDeformation;

/**
 * Opaque stored-energy density handle.
 */
typedef struct CavDensity CavDensity;

typedef struct CavVec2 {
  double x;
  double y;
} CavVec2;

/**
 * Row-major 2×2 matrix.
 */
typedef struct CavMat2 {
  double a11;
  double a12;
  double a21;
  double a22;
} CavMat2;

typedef struct CavCavity {
  double volume;
  double signed_volume;
  double perimeter;
  bool converged;
} CavCavity;

typedef struct CavEnergy {
  double elastic;
  double volume;
  double perimeter;
  double total;
  /**
   * Set when the limit of the trace perimeters differs from the perimeter
   * of the limit cavity. Always false for regularized energies.
   */
  bool conv_perimeter_violated;
} CavEnergy;

typedef struct CavRadialMinimum {
  double energy;
  double cavity_radius;
  size_t iterations;
  bool converged;
} CavRadialMinimum;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *cav_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cav_version(void);

/**
 * Catalog deformation by key (`radial`, `change-of-reference`,
 * `superposition`, `spike`). A NaN `b` selects the default parameter.
 *
 * # Safety
 * `key` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CavStatus cav_deformation_catalog(const char *key, double b, struct CavDeformation **out);

/**
 * # Safety
 * `y` must be null or a handle from [`cav_deformation_catalog`] not yet freed.
 */
void cav_deformation_free(struct CavDeformation *y);

/**
 * # Safety
 * `y` must be a live handle and `out` a valid pointer.
 */
enum CavStatus cav_deformation_eval(const struct CavDeformation *y,
                                    struct CavVec2 x,
                                    struct CavVec2 *out);

/**
 * # Safety
 * `y` must be a live handle and `out` a valid pointer.
 */
enum CavStatus cav_deformation_grad(const struct CavDeformation *y,
                                    struct CavVec2 x,
                                    struct CavMat2 *out);

/**
 * Volume and perimeter of the image of the circle `S(a, eps)`.
 *
 * # Safety
 * `y` must be a live handle and `out` a valid pointer.
 */
enum CavStatus cav_cavity_metrics(const struct CavDeformation *y,
                                  struct CavVec2 a,
                                  double eps,
                                  struct CavCavity *out);

/**
 * `|F|^p + (det F - 1)² + 1/det F`, `p ≥ 2`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CavStatus cav_density_default(double p, struct CavDensity **out);

/**
 * `|F|^p + (det F)^q + 1/det F`, `p, q > 1`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CavStatus cav_density_power(double p, double q, struct CavDensity **out);

/**
 * # Safety
 * `w` must be null or a density handle not yet freed.
 */
void cav_density_free(struct CavDensity *w);

/**
 * `W(F)`; `+∞` when `det F ≤ 0`.
 *
 * # Safety
 * `w` must be a live handle and `out` a valid pointer.
 */
enum CavStatus cav_density_eval(const struct CavDensity *w, struct CavMat2 f, double *out);

/**
 * Regularized energy of `y` with flaws `points[0..n]` of core radius `eps`
 * on the deformation's own domain.
 *
 * # Safety
 * Handles must be live, `points` must hold `n` entries and `out` must be valid.
 */
enum CavStatus cav_regularized_energy(const struct CavDeformation *y,
                                      const struct CavDensity *w,
                                      const struct CavVec2 *points,
                                      size_t n,
                                      double eps,
                                      double lambda_v,
                                      double lambda_p,
                                      struct CavEnergy *out);

/**
 * Limit energy of `y` with flaws `points[0..n]`, cavities extrapolated from
 * circles of radii 0.2, 0.1, 0.05 and 0.025.
 *
 * # Safety
 * Handles must be live, `points` must hold `n` entries and `out` must be valid.
 */
enum CavStatus cav_limit_energy(const struct CavDeformation *y,
                                const struct CavDensity *w,
                                const struct CavVec2 *points,
                                size_t n,
                                double lambda_v,
                                double lambda_p,
                                struct CavEnergy *out);

/**
 * Minimizes the radially reduced energy on the annulus `eps < |x| < R`
 * with `ρ(R) = boundary_value`, using `k` profile segments.
 *
 * # Safety
 * `w` must be a live handle and `out` a valid pointer.
 */
enum CavStatus cav_minimize_radial(const struct CavDensity *w,
                                   double eps,
                                   double outer_radius,
                                   double boundary_value,
                                   double lambda_v,
                                   double lambda_p,
                                   size_t k,
                                   struct CavRadialMinimum *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAVICORE_H */
