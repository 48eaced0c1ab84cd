#ifndef SHADOW_TRACK_H
#define SHADOW_TRACK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum StStatus {
  ST_STATUS_OK = 0,
  ST_STATUS_NULL_POINTER = 1,
  ST_STATUS_INVALID_ARGUMENT = 2,
  ST_STATUS_OUT_OF_ORDER = 3,
  ST_STATUS_WINDOW_TOO_SPARSE = 4,
  ST_STATUS_NUMERICAL = 5,
  ST_STATUS_GEOMETRY = 6,
  ST_STATUS_PANIC = 7,
} StStatus;

typedef enum StCorrelation {
  ST_CORRELATION_IGNORE = 0,
  ST_CORRELATION_PROPAGATE = 1,
} StCorrelation;

typedef enum StProvenance {
  ST_PROVENANCE_OBSERVED = 0,
  ST_PROVENANCE_FORECAST_INSERTED = 1,
  ST_PROVENANCE_DROPPED = 2,
} StProvenance;

typedef enum StPolicy {
  ST_POLICY_COALESCE_GAPS = 0,
  ST_POLICY_ZERO_WEIGHT_PLACEHOLDER = 1,
  ST_POLICY_FORECAST_INSERT = 2,
} StPolicy;

/*
 Opaque sequential tracker.
 */
typedef struct StTracker StTracker;

/*
 A planar position estimate with its information matrix stored as the
 upper triangle `(xx, xy, yy)`. `weight` is the condition weight already
 folded into `information`.
 */
typedef struct StRawEstimate {
  double x;
  double y;
  double information[3];
  double weight;
  enum StProvenance provenance;
} StRawEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length in bytes excluding
 the terminator, or 0 when there is no error.

 # Safety
 `buf` must be NULL or point to `len` writable bytes.
 */
size_t st_last_error_message(char *buf, size_t len);

/*
 Static description of a status code. Never NULL; do not free.
 */
const char *st_status_name(enum StStatus status);

/*
 Batch scalar smoothing over `n` samples. `weights` may be NULL for unit
 weights. `out_positions` and `out_velocities` receive `n` values;
 `out_accelerations` receives `n - 1` per-interval accelerations. Any output
 pointer may be NULL.

 # Safety
 Non-NULL pointers must reference arrays of the stated lengths.
 */
enum StStatus st_solve_scalar(const double *times,
                              const double *values,
                              const double *weights,
                              size_t n,
                              double eta,
                              double *out_positions,
                              double *out_velocities,
                              double *out_accelerations);

/*
 Position from one range/bearing reading at `site` (`site` points to two doubles).

 # Safety
 `site` must point to 2 doubles and `out` to one writable [`StRawEstimate`].
 */
enum StStatus st_range_bearing_to_position(const double *site,
                                           double range,
                                           double bearing,
                                           double range_variance,
                                           double bearing_variance,
                                           enum StCorrelation mode,
                                           struct StRawEstimate *out);

/*
 Triangulated position from two bearings. `sites` holds `ax, ay, bx, by`;
 `bearings` and `variances` hold one entry per site. Near-singular fixes
 come back with `provenance == Dropped` and status `Ok`.

 # Safety
 `sites` must point to 4 doubles, `bearings` and `variances` to 2 each,
 `out` to one writable [`StRawEstimate`].
 */
enum StStatus st_two_bearings_to_position(const double *sites,
                                          const double *bearings,
                                          const double *variances,
                                          enum StCorrelation mode,
                                          double drop_threshold,
                                          struct StRawEstimate *out);

/*
 Trilaterated position from two ranges; of the two intersections the one
 nearer `disambiguator` (2 doubles) is returned.

 # Safety
 `sites` must point to 4 doubles, `ranges`, `variances` and `disambiguator`
 to 2 each, `out` to one writable [`StRawEstimate`].
 */
enum StStatus st_two_ranges_to_position(const double *sites,
                                        const double *ranges,
                                        const double *variances,
                                        const double *disambiguator,
                                        enum StCorrelation mode,
                                        double drop_threshold,
                                        struct StRawEstimate *out);

/*
 Creates a tracker over a sliding window of `window` fixes.

 # Safety
 `out` must point to a writable handle slot. The handle must be released
 with [`st_tracker_free`].
 */
enum StStatus st_tracker_new(size_t window,
                             double eta,
                             enum StPolicy policy,
                             double gamma,
                             struct StTracker **out);

/*
 Releases a tracker. NULL is ignored.

 # Safety
 `tracker` must be NULL or a handle from [`st_tracker_new`] not yet freed.
 */
void st_tracker_free(struct StTracker *tracker);

/*
 Feeds a scalar observation and writes the current estimate to `out_position`
 (one double, may be NULL). Returns `WindowTooSparse` until three usable
 observations have arrived.

 # Safety
 `tracker` must be a live handle; `out_position` NULL or writable.
 */
enum StStatus st_tracker_step_scalar(struct StTracker *tracker,
                                     double t,
                                     double value,
                                     double information,
                                     double *out_position);

/*
 Feeds a planar fix as produced by the geometry functions. `out_position`
 receives two doubles (may be NULL).

 # Safety
 `tracker` must be a live handle, `fix` readable, `out_position` NULL or
 pointing to 2 writable doubles.
 */
enum StStatus st_tracker_step_planar(struct StTracker *tracker,
                                     double t,
                                     const struct StRawEstimate *fix,
                                     double *out_position);

/*
 Reports that no observation arrived at `t`; the tracker's missing-data
 policy decides what enters the window.

 # Safety
 `tracker` must be a live handle; `out_position` NULL or pointing to as
 many writable doubles as the tracked dimension.
 */
enum StStatus st_tracker_gap(struct StTracker *tracker, double t, double *out_position);

/*
 Number of entries currently held in the window, or 0 for NULL.

 # Safety
 `tracker` must be NULL or a live handle.
 */
size_t st_tracker_window_len(const struct StTracker *tracker);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHADOW_TRACK_H */
