//! C ABI over the shadow-track library.
//!
//! Every function returns an [`StStatus`]; on failure a description is kept in
//! thread-local storage and can be copied out with [`st_last_error_message`].
//! Trackers are opaque handles created by [`st_tracker_new`] and released by
//! [`st_tracker_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::DMatrix;
use shadow_track::geometry::{
    range_bearing_to_position, two_bearings_to_position, two_ranges_to_position, CorrelationMode, GeometryError,
    PolarObservation, Provenance, RawPositionEstimate,
};
use shadow_track::grid::TimeGrid;
use shadow_track::solver::{solve_scalar, ScalarObservationSeries, SolveError};
use shadow_track::tracker::{MissingPolicy, TrackError, TrackInput, Tracker, TrackerConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfOrder = 3,
    WindowTooSparse = 4,
    Numerical = 5,
    Geometry = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StPolicy {
    CoalesceGaps = 0,
    ZeroWeightPlaceholder = 1,
    ForecastInsert = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StCorrelation {
    Ignore = 0,
    Propagate = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StProvenance {
    Observed = 0,
    ForecastInserted = 1,
    Dropped = 2,
}

/// A planar position estimate with its information matrix stored as the
/// upper triangle `(xx, xy, yy)`. `weight` is the condition weight already
/// folded into `information`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StRawEstimate {
    pub x: f64,
    pub y: f64,
    pub information: [f64; 3],
    pub weight: f64,
    pub provenance: StProvenance,
}

/// Opaque sequential tracker.
pub struct StTracker {
    inner: Tracker,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl ToString) {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: StStatus, msg: impl ToString) -> StStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> StStatus) -> StStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(StStatus::Panic, "internal panic"))
}

fn solve_status(e: &SolveError) -> StStatus {
    match e {
        SolveError::NonPositiveEta(_) | SolveError::ShapeMismatch(_) | SolveError::Grid(_) => StStatus::InvalidArgument,
        _ => StStatus::Numerical,
    }
}

fn track_status(e: &TrackError) -> StStatus {
    match e {
        TrackError::OutOfOrderTimestamp { .. } => StStatus::OutOfOrder,
        TrackError::WindowTooSparse { .. } | TrackError::NoTrajectoryYet => StStatus::WindowTooSparse,
        TrackError::DimensionMismatch { .. } | TrackError::InvalidConfig(_) => StStatus::InvalidArgument,
        TrackError::Solve(s) => solve_status(s),
    }
}

fn geometry_fail(e: GeometryError) -> StStatus {
    fail(StStatus::Geometry, e)
}

fn correlation(c: StCorrelation) -> CorrelationMode {
    match c {
        StCorrelation::Ignore => CorrelationMode::IgnoreCorrelation,
        StCorrelation::Propagate => CorrelationMode::Propagate,
    }
}

fn to_c_provenance(p: Provenance) -> StProvenance {
    match p {
        Provenance::Observed => StProvenance::Observed,
        Provenance::ForecastInserted => StProvenance::ForecastInserted,
        Provenance::Dropped => StProvenance::Dropped,
    }
}

fn to_c_estimate(raw: &RawPositionEstimate) -> StRawEstimate {
    let i = raw.information;
    StRawEstimate {
        x: raw.position[0],
        y: raw.position[1],
        information: [i[(0, 0)], i[(0, 1)], i[(1, 1)]],
        weight: raw.weight,
        provenance: to_c_provenance(raw.provenance),
    }
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes excluding
/// the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn st_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Static description of a status code. Never NULL; do not free.
#[no_mangle]
pub extern "C" fn st_status_name(status: StStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        StStatus::Ok => b"ok\0",
        StStatus::NullPointer => b"null pointer\0",
        StStatus::InvalidArgument => b"invalid argument\0",
        StStatus::OutOfOrder => b"out-of-order timestamp\0",
        StStatus::WindowTooSparse => b"window too sparse\0",
        StStatus::Numerical => b"numerical failure\0",
        StStatus::Geometry => b"degenerate geometry\0",
        StStatus::Panic => b"internal panic\0",
    };
    s.as_ptr() as *const c_char
}

/// Batch scalar smoothing over `n` samples. `weights` may be NULL for unit
/// weights. `out_positions` and `out_velocities` receive `n` values;
/// `out_accelerations` receives `n - 1` per-interval accelerations. Any output
/// pointer may be NULL.
///
/// # Safety
/// Non-NULL pointers must reference arrays of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn st_solve_scalar(
    times: *const f64,
    values: *const f64,
    weights: *const f64,
    n: usize,
    eta: f64,
    out_positions: *mut f64,
    out_velocities: *mut f64,
    out_accelerations: *mut f64,
) -> StStatus {
    guard(|| {
        if times.is_null() || values.is_null() {
            return fail(StStatus::NullPointer, "times and values are required");
        }
        let t = std::slice::from_raw_parts(times, n).to_vec();
        let v = std::slice::from_raw_parts(values, n).to_vec();
        let w = if weights.is_null() { vec![1.0; n] } else { std::slice::from_raw_parts(weights, n).to_vec() };
        let grid = match TimeGrid::new(t) {
            Ok(g) => g,
            Err(e) => return fail(StStatus::InvalidArgument, e),
        };
        let traj = match ScalarObservationSeries::new(grid, v, w).and_then(|obs| solve_scalar(&obs, eta)) {
            Ok(tr) => tr,
            Err(e) => return fail(solve_status(&e), e),
        };
        if !out_positions.is_null() {
            std::slice::from_raw_parts_mut(out_positions, n).copy_from_slice(traj.positions.as_slice());
        }
        if !out_velocities.is_null() {
            std::slice::from_raw_parts_mut(out_velocities, n).copy_from_slice(traj.velocities.as_slice());
        }
        if !out_accelerations.is_null() {
            std::slice::from_raw_parts_mut(out_accelerations, n - 1).copy_from_slice(traj.accelerations.as_slice());
        }
        StStatus::Ok
    })
}

/// Position from one range/bearing reading at `site` (`site` points to two doubles).
///
/// # Safety
/// `site` must point to 2 doubles and `out` to one writable [`StRawEstimate`].
#[no_mangle]
pub unsafe extern "C" fn st_range_bearing_to_position(
    site: *const f64,
    range: f64,
    bearing: f64,
    range_variance: f64,
    bearing_variance: f64,
    mode: StCorrelation,
    out: *mut StRawEstimate,
) -> StStatus {
    guard(|| {
        if site.is_null() || out.is_null() {
            return fail(StStatus::NullPointer, "site and out are required");
        }
        let obs = PolarObservation { range, bearing, range_variance, bearing_variance };
        match range_bearing_to_position([*site, *site.add(1)], &obs, correlation(mode)) {
            Ok(raw) => {
                *out = to_c_estimate(&raw);
                StStatus::Ok
            }
            Err(e) => geometry_fail(e),
        }
    })
}

/// Triangulated position from two bearings. `sites` holds `ax, ay, bx, by`;
/// `bearings` and `variances` hold one entry per site. Near-singular fixes
/// come back with `provenance == Dropped` and status `Ok`.
///
/// # Safety
/// `sites` must point to 4 doubles, `bearings` and `variances` to 2 each,
/// `out` to one writable [`StRawEstimate`].
#[no_mangle]
pub unsafe extern "C" fn st_two_bearings_to_position(
    sites: *const f64,
    bearings: *const f64,
    variances: *const f64,
    mode: StCorrelation,
    drop_threshold: f64,
    out: *mut StRawEstimate,
) -> StStatus {
    guard(|| {
        if sites.is_null() || bearings.is_null() || variances.is_null() || out.is_null() {
            return fail(StStatus::NullPointer, "all pointers are required");
        }
        let s = std::slice::from_raw_parts(sites, 4);
        let b = std::slice::from_raw_parts(bearings, 2);
        let v = std::slice::from_raw_parts(variances, 2);
        match two_bearings_to_position(
            [s[0], s[1]],
            [s[2], s[3]],
            b[0],
            b[1],
            [v[0], v[1]],
            correlation(mode),
            drop_threshold,
        ) {
            Ok(raw) => {
                *out = to_c_estimate(&raw);
                StStatus::Ok
            }
            Err(e) => geometry_fail(e),
        }
    })
}

/// Trilaterated position from two ranges; of the two intersections the one
/// nearer `disambiguator` (2 doubles) is returned.
///
/// # Safety
/// `sites` must point to 4 doubles, `ranges`, `variances` and `disambiguator`
/// to 2 each, `out` to one writable [`StRawEstimate`].
#[no_mangle]
pub unsafe extern "C" fn st_two_ranges_to_position(
    sites: *const f64,
    ranges: *const f64,
    variances: *const f64,
    disambiguator: *const f64,
    mode: StCorrelation,
    drop_threshold: f64,
    out: *mut StRawEstimate,
) -> StStatus {
    guard(|| {
        if sites.is_null() || ranges.is_null() || variances.is_null() || disambiguator.is_null() || out.is_null() {
            return fail(StStatus::NullPointer, "all pointers are required");
        }
        let s = std::slice::from_raw_parts(sites, 4);
        let r = std::slice::from_raw_parts(ranges, 2);
        let v = std::slice::from_raw_parts(variances, 2);
        let d = std::slice::from_raw_parts(disambiguator, 2);
        match two_ranges_to_position(
            [s[0], s[1]],
            [s[2], s[3]],
            r[0],
            r[1],
            [v[0], v[1]],
            [d[0], d[1]],
            correlation(mode),
            drop_threshold,
        ) {
            Ok(raw) => {
                *out = to_c_estimate(&raw);
                StStatus::Ok
            }
            Err(e) => geometry_fail(e),
        }
    })
}

/// Creates a tracker over a sliding window of `window` fixes.
///
/// # Safety
/// `out` must point to a writable handle slot. The handle must be released
/// with [`st_tracker_free`].
#[no_mangle]
pub unsafe extern "C" fn st_tracker_new(
    window: usize,
    eta: f64,
    policy: StPolicy,
    gamma: f64,
    out: *mut *mut StTracker,
) -> StStatus {
    guard(|| {
        if out.is_null() {
            return fail(StStatus::NullPointer, "out is required");
        }
        let policy = match policy {
            StPolicy::CoalesceGaps => MissingPolicy::CoalesceGaps,
            StPolicy::ZeroWeightPlaceholder => MissingPolicy::ZeroWeightPlaceholder,
            StPolicy::ForecastInsert => MissingPolicy::ForecastInsert,
        };
        let mut config = TrackerConfig::new(window, eta).with_policy(policy);
        config.gamma = gamma;
        match Tracker::new(config) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(StTracker { inner }));
                StStatus::Ok
            }
            Err(e) => fail(track_status(&e), e),
        }
    })
}

/// Releases a tracker. NULL is ignored.
///
/// # Safety
/// `tracker` must be NULL or a handle from [`st_tracker_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn st_tracker_free(tracker: *mut StTracker) {
    if !tracker.is_null() {
        drop(Box::from_raw(tracker));
    }
}

unsafe fn step(tracker: *mut StTracker, input: TrackInput, out_position: *mut f64) -> StStatus {
    if tracker.is_null() {
        return fail(StStatus::NullPointer, "tracker is required");
    }
    let tracker = &mut (*tracker).inner;
    match tracker.step(input) {
        Ok(est) => {
            if !out_position.is_null() {
                std::slice::from_raw_parts_mut(out_position, est.position.len()).copy_from_slice(&est.position);
            }
            StStatus::Ok
        }
        Err(e) => fail(track_status(&e), e),
    }
}

/// Feeds a scalar observation and writes the current estimate to `out_position`
/// (one double, may be NULL). Returns `WindowTooSparse` until three usable
/// observations have arrived.
///
/// # Safety
/// `tracker` must be a live handle; `out_position` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn st_tracker_step_scalar(
    tracker: *mut StTracker,
    t: f64,
    value: f64,
    information: f64,
    out_position: *mut f64,
) -> StStatus {
    guard(|| step(tracker, TrackInput::scalar(t, value, information), out_position))
}

/// Feeds a planar fix as produced by the geometry functions. `out_position`
/// receives two doubles (may be NULL).
///
/// # Safety
/// `tracker` must be a live handle, `fix` readable, `out_position` NULL or
/// pointing to 2 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn st_tracker_step_planar(
    tracker: *mut StTracker,
    t: f64,
    fix: *const StRawEstimate,
    out_position: *mut f64,
) -> StStatus {
    guard(|| {
        if fix.is_null() {
            return fail(StStatus::NullPointer, "fix is required");
        }
        let f = &*fix;
        let [ixx, ixy, iyy] = f.information;
        let provenance = match f.provenance {
            StProvenance::Observed => Provenance::Observed,
            StProvenance::ForecastInserted => Provenance::ForecastInserted,
            StProvenance::Dropped => Provenance::Dropped,
        };
        let input = match TrackInput::vector(t, vec![f.x, f.y], DMatrix::from_row_slice(2, 2, &[ixx, ixy, ixy, iyy])) {
            TrackInput::Observation(mut entry) => {
                entry.weight = f.weight;
                entry.provenance = provenance;
                TrackInput::Observation(entry)
            }
            gap => gap,
        };
        step(tracker, input, out_position)
    })
}

/// Reports that no observation arrived at `t`; the tracker's missing-data
/// policy decides what enters the window.
///
/// # Safety
/// `tracker` must be a live handle; `out_position` NULL or pointing to as
/// many writable doubles as the tracked dimension.
#[no_mangle]
pub unsafe extern "C" fn st_tracker_gap(tracker: *mut StTracker, t: f64, out_position: *mut f64) -> StStatus {
    guard(|| step(tracker, TrackInput::gap(t), out_position))
}

/// Number of entries currently held in the window, or 0 for NULL.
///
/// # Safety
/// `tracker` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn st_tracker_window_len(tracker: *const StTracker) -> usize {
    if tracker.is_null() {
        return 0;
    }
    (*tracker).inner.window().count()
}
