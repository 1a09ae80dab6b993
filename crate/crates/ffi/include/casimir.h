#ifndef CASIMIR_H
#define CASIMIR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CasimirStatus {
  CASIMIR_STATUS_OK = 0,
  CASIMIR_STATUS_NULL_POINTER = 1,
  CASIMIR_STATUS_INVALID_ARGUMENT = 2,
  CASIMIR_STATUS_GEOMETRY = 3,
  CASIMIR_STATUS_NUMERICAL = 4,
  CASIMIR_STATUS_PARSE = 5,
  CASIMIR_STATUS_PANIC = 6,
} CasimirStatus;

typedef enum CasimirForceRoute {
  CASIMIR_FORCE_ROUTE_FINITE_DIFFERENCE = 0,
  CASIMIR_FORCE_ROUTE_SURFACE_INTEGRAL = 1,
  CASIMIR_FORCE_ROUTE_BOUNDARY_HADAMARD = 2,
} CasimirForceRoute;

/**
 * Opaque configuration handle.
 */
typedef struct CasimirConfig CasimirConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread ("" after a success).
 */
const char *casimir_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *casimir_version(void);

/**
 * Parse a configuration document (TOML, or JSON when `is_json` is nonzero).
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CasimirStatus casimir_config_parse(const char *text,
                                        int32_t is_json,
                                        struct CasimirConfig **out);

/**
 * Two intervals [a1, b1] and [a2, b2] on the line, massless.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CasimirStatus casimir_config_two_intervals(double a1,
                                                double b1,
                                                double a2,
                                                double b2,
                                                struct CasimirConfig **out);

/**
 * Discs of radii r1 at the origin and r2 at (center_distance, 0), massless.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CasimirStatus casimir_config_two_discs(double r1,
                                            double r2,
                                            double center_distance,
                                            struct CasimirConfig **out);

/**
 * Copy of `config` with mass `mass`.
 *
 * # Safety
 * `config` must come from a constructor here; `out` must be valid.
 */
enum CasimirStatus casimir_config_with_mass(const struct CasimirConfig *config,
                                            double mass,
                                            struct CasimirConfig **out);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `config` must come from a constructor here and not be used afterwards.
 */
void casimir_config_free(struct CasimirConfig *config);

/**
 * Number of obstacles, or 0 for a null handle.
 *
 * # Safety
 * `config` must be null or a live handle.
 */
size_t casimir_config_len(const struct CasimirConfig *config);

/**
 * Ξ(iκ) with `n_per_obstacle` boundary nodes (ignored in d = 1).
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
enum CasimirStatus casimir_xi(const struct CasimirConfig *config,
                              double kappa,
                              size_t n_per_obstacle,
                              double *out);

/**
 * Relative energy and its error estimate.
 *
 * # Safety
 * `config` must be a live handle; `value` must be valid; `error` may be null.
 */
enum CasimirStatus casimir_energy(const struct CasimirConfig *config,
                                  size_t n_per_obstacle,
                                  double tol,
                                  double *value,
                                  double *error);

/**
 * Force on obstacle `obstacle` by the chosen route; `force` receives two doubles.
 *
 * # Safety
 * `config` must be a live handle; `force` must point to two doubles; `error` may be null.
 */
enum CasimirStatus casimir_force(const struct CasimirConfig *config,
                                 size_t obstacle,
                                 enum CasimirForceRoute route,
                                 size_t n_per_obstacle,
                                 double tol,
                                 double *force,
                                 double *error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CASIMIR_H */
