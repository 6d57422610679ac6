#ifndef ARNOLD_CERT_H
#define ARNOLD_CERT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum AcStatus {
  AC_STATUS_OK = 0,
  AC_STATUS_NULL_POINTER = 1,
  AC_STATUS_INVALID_PARAMS = 2,
  AC_STATUS_NO_CERTIFICATE = 3,
  AC_STATUS_INCONCLUSIVE = 4,
  AC_STATUS_NUMERICAL = 5,
  AC_STATUS_PANIC = 6,
} AcStatus;

/**
 * A mixing certificate.
 */
typedef struct AcMixing AcMixing;

/**
 * Map parameters `(tau, eps, xi)`.
 */
typedef struct AcParams AcParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ac_last_error(void);

/**
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum AcStatus ac_params_new(double tau, double eps, double xi, struct AcParams **out);

/**
 * # Safety
 * `p` must be NULL or a handle from `ac_params_new` not yet freed.
 */
void ac_params_free(struct AcParams *p);

/**
 * Certify mixing on an `n_cells` grid with at most `n_max` steps. On
 * success `*out` holds a certificate, which may still be discrete-only:
 * check `ac_mixing_is_true_operator`.
 *
 * # Safety
 * `p` must be a live params handle and `out` valid for one write.
 */
enum AcStatus ac_certify_mixing(const struct AcParams *p,
                                size_t n_cells,
                                size_t n_max,
                                struct AcMixing **out);

/**
 * # Safety
 * `c` must be NULL or a live certificate handle.
 */
void ac_mixing_free(struct AcMixing *c);

/**
 * Number of steps `n`; 0 for a NULL handle.
 *
 * # Safety
 * `c` must be NULL or a live certificate handle.
 */
size_t ac_mixing_n(const struct AcMixing *c);

/**
 * # Safety
 * `c` must be NULL or a live certificate handle.
 */
bool ac_mixing_is_true_operator(const struct AcMixing *c);

/**
 * Enclosure of the rate `alpha`.
 *
 * # Safety
 * `c` must be a live certificate handle; `lo`, `hi` valid for writes.
 */
enum AcStatus ac_mixing_alpha(const struct AcMixing *c, double *lo, double *hi);

/**
 * Radius of the `tau`-ball on which the certificate persists; `lo` is the
 * certified radius.
 *
 * # Safety
 * `c` must be a live certificate handle; `lo`, `hi` valid for writes.
 */
enum AcStatus ac_mixing_theta(const struct AcMixing *c, double *lo, double *hi);

/**
 * Certified rotation number. `coarse` is the starting size of the grid
 * that bounds the resolvent, `fine` the size of the density grid.
 *
 * # Safety
 * `p` must be a live params handle; `lo`, `hi` valid for writes.
 */
enum AcStatus ac_rotation_number(const struct AcParams *p,
                                 size_t coarse,
                                 size_t fine,
                                 double *lo,
                                 double *hi);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ARNOLD_CERT_H */
