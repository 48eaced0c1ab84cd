//! Planar sensor geometry: turn range/bearing observations into raw Cartesian
//! position estimates with an information matrix.
//!
//! For observations `q = g(p)` with error information `I_q`, the estimate's
//! information is `I_p = K' I_q K` with `K = dg/dp` evaluated at the raw
//! estimate (the true position is unknown). [`CorrelationMode::IgnoreCorrelation`]
//! instead keeps only the per-axis variances of `K^-1 C_q K^-T`.

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this reciprocal condition a geometric fix is dropped.
pub const DEFAULT_DROP_THRESHOLD: f64 = 1e-6;
pub const MIN_RANGE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("range {0} is too close to zero")]
    RangeTooSmall(f64),
    #[error("sensor sites coincide")]
    CoincidentSites,
    #[error("variance {0} must be positive and finite")]
    NonPositiveVariance(f64),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    #[default]
    Observed,
    ForecastInserted,
    Dropped,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Observed => "observed",
            Provenance::ForecastInserted => "forecast-inserted",
            Provenance::Dropped => "dropped",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "observed" => Some(Self::Observed),
            "forecast-inserted" => Some(Self::ForecastInserted),
            "dropped" => Some(Self::Dropped),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationMode {
    #[default]
    IgnoreCorrelation,
    Propagate,
}

/// Straight-line constant-speed motion from `position` (at `t_start`) to `end`
/// (at `t_end`); clamped outside that interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearMotion {
    pub end: [f64; 2],
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSite {
    pub position: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<LinearMotion>,
}

impl SensorSite {
    pub fn fixed(x: f64, y: f64) -> Self {
        Self { position: [x, y], motion: None }
    }

    pub fn moving(start: [f64; 2], end: [f64; 2], t_start: f64, t_end: f64) -> Self {
        Self { position: start, motion: Some(LinearMotion { end, t_start, t_end }) }
    }

    pub fn position_at(&self, t: f64) -> [f64; 2] {
        match self.motion {
            None => self.position,
            Some(m) => {
                let span = m.t_end - m.t_start;
                let frac = if span > 0.0 { ((t - m.t_start) / span).clamp(0.0, 1.0) } else { 1.0 };
                [
                    self.position[0] + frac * (m.end[0] - self.position[0]),
                    self.position[1] + frac * (m.end[1] - self.position[1]),
                ]
            }
        }
    }
}

/// Range and anticlockwise bearing (radians from the x-axis) with variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarObservation {
    pub range: f64,
    pub bearing: f64,
    pub range_variance: f64,
    pub bearing_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPositionEstimate {
    /// NaN when the geometry admits no position (then always `Dropped`).
    pub position: [f64; 2],
    pub information: Matrix2<f64>,
    pub weight: f64,
    pub provenance: Provenance,
}

impl RawPositionEstimate {
    fn dropped(position: [f64; 2], weight: f64) -> Self {
        Self { position, information: Matrix2::zeros(), weight, provenance: Provenance::Dropped }
    }

    pub fn is_usable(&self) -> bool {
        self.provenance != Provenance::Dropped
    }
}

/// Bearing folded into `(-pi, pi]`.
pub fn normalize_bearing(theta: f64) -> f64 {
    use std::f64::consts::PI;
    let mut x = theta % (2.0 * PI);
    if x <= -PI {
        x += 2.0 * PI;
    } else if x > PI {
        x -= 2.0 * PI;
    }
    x
}

/// `K' I_q K`, symmetrised.
pub fn propagate_information(k: &Matrix2<f64>, info_q: &Matrix2<f64>) -> Matrix2<f64> {
    let x = k.transpose() * info_q * k;
    (x + x.transpose()) * 0.5
}

/// Exact 1-norm reciprocal condition `1 / (|M|_1 |M^-1|_1)`; 0 when singular.
pub fn rcond_1norm(m: &Matrix2<f64>) -> f64 {
    let det = m.determinant();
    if det == 0.0 || !det.is_finite() {
        return 0.0;
    }
    let inv = Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det;
    let norm1 = |a: &Matrix2<f64>| (a[(0, 0)].abs() + a[(1, 0)].abs()).max(a[(0, 1)].abs() + a[(1, 1)].abs());
    let rc = 1.0 / (norm1(m) * norm1(&inv));
    if rc.is_finite() {
        rc.clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Information of the raw estimate from the observation Jacobian `k` and
/// observation variances.
fn estimate_information(k: &Matrix2<f64>, variances: [f64; 2], mode: CorrelationMode) -> Matrix2<f64> {
    match mode {
        CorrelationMode::Propagate => {
            propagate_information(k, &Matrix2::new(1.0 / variances[0], 0.0, 0.0, 1.0 / variances[1]))
        }
        CorrelationMode::IgnoreCorrelation => match k.try_inverse() {
            Some(j) => {
                let cov = j * Matrix2::new(variances[0], 0.0, 0.0, variances[1]) * j.transpose();
                let inv = |c: f64| if c > 0.0 && c.is_finite() { 1.0 / c } else { 0.0 };
                Matrix2::new(inv(cov[(0, 0)]), 0.0, 0.0, inv(cov[(1, 1)]))
            }
            None => Matrix2::zeros(),
        },
    }
}

/// Diagonal information with the same per-component variances as `info`:
/// `diag(1 / diag(info^-1))`. A singular matrix just loses its off-diagonal.
pub fn decorrelate_information(info: &DMatrix<f64>) -> DMatrix<f64> {
    let d = info.nrows();
    let mut out = DMatrix::zeros(d, d);
    match info.clone().try_inverse() {
        Some(cov) if cov.iter().all(|v| v.is_finite()) => {
            for k in 0..d {
                let c = cov[(k, k)];
                out[(k, k)] = if c > 0.0 { 1.0 / c } else { 0.0 };
            }
        }
        _ => {
            for k in 0..d {
                out[(k, k)] = info[(k, k)];
            }
        }
    }
    out
}

fn check_variance(v: f64) -> Result<(), GeometryError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::NonPositiveVariance(v))
    }
}

/// `d(x, y)/d(r, theta)` for a single site.
pub fn range_bearing_jacobian(range: f64, bearing: f64) -> Matrix2<f64> {
    let (s, c) = bearing.sin_cos();
    Matrix2::new(c, -range * s, s, range * c)
}

/// `d(r, theta)/d(x, y)`, the inverse of [`range_bearing_jacobian`].
pub fn range_bearing_inverse_jacobian(range: f64, bearing: f64) -> Matrix2<f64> {
    let (s, c) = bearing.sin_cos();
    Matrix2::new(c, s, -s / range, c / range)
}

pub fn range_bearing_to_position(
    site: [f64; 2],
    obs: &PolarObservation,
    mode: CorrelationMode,
) -> Result<RawPositionEstimate, GeometryError> {
    if !(obs.range.is_finite() && obs.bearing.is_finite()) {
        return Err(GeometryError::NonFinite("range/bearing"));
    }
    if obs.range < MIN_RANGE {
        return Err(GeometryError::RangeTooSmall(obs.range));
    }
    check_variance(obs.range_variance)?;
    check_variance(obs.bearing_variance)?;
    let (s, c) = obs.bearing.sin_cos();
    let position = [site[0] + obs.range * c, site[1] + obs.range * s];
    let k = range_bearing_inverse_jacobian(obs.range, obs.bearing);
    let information = estimate_information(&k, [obs.range_variance, obs.bearing_variance], mode);
    Ok(RawPositionEstimate { position, information, weight: 1.0, provenance: Provenance::Observed })
}

/// Jacobian of the two bearing angles `atan2(y - b, x - a)` with respect to `(x, y)`.
pub fn two_bearing_jacobian(position: [f64; 2], site_a: [f64; 2], site_b: [f64; 2]) -> Matrix2<f64> {
    let row = |site: [f64; 2]| {
        let (dx, dy) = (position[0] - site[0], position[1] - site[1]);
        let r2 = dx * dx + dy * dy;
        (-dy / r2, dx / r2)
    };
    let (a0, a1) = row(site_a);
    let (b0, b1) = row(site_b);
    Matrix2::new(a0, a1, b0, b1)
}

#[allow(clippy::too_many_arguments)]
pub fn two_bearings_to_position(
    site_a: [f64; 2],
    site_b: [f64; 2],
    bearing_a: f64,
    bearing_b: f64,
    variances: [f64; 2],
    mode: CorrelationMode,
    drop_threshold: f64,
) -> Result<RawPositionEstimate, GeometryError> {
    if site_a == site_b {
        return Err(GeometryError::CoincidentSites);
    }
    if !(bearing_a.is_finite() && bearing_b.is_finite()) {
        return Err(GeometryError::NonFinite("bearing"));
    }
    check_variance(variances[0])?;
    check_variance(variances[1])?;
    let (sa, ca) = bearing_a.sin_cos();
    let (sb, cb) = bearing_b.sin_cos();
    let system = Matrix2::new(ca, -cb, sa, -sb);
    let weight = rcond_1norm(&system);
    if weight == 0.0 {
        return Ok(RawPositionEstimate::dropped([f64::NAN; 2], 0.0));
    }
    let rhs = Vector2::new(site_b[0] - site_a[0], site_b[1] - site_a[1]);
    let Some(inv) = system.try_inverse() else {
        return Ok(RawPositionEstimate::dropped([f64::NAN; 2], 0.0));
    };
    let s = (inv * rhs)[0];
    let position = [site_a[0] + s * ca, site_a[1] + s * sa];
    if weight < drop_threshold || !position.iter().all(|v| v.is_finite()) {
        return Ok(RawPositionEstimate::dropped(position, weight));
    }
    let k = two_bearing_jacobian(position, site_a, site_b);
    let information = estimate_information(&k, variances, mode) * weight;
    Ok(RawPositionEstimate { position, information, weight, provenance: Provenance::Observed })
}

/// Jacobian of the two ranges with respect to `(x, y)`, given the ranges.
pub fn two_range_jacobian(position: [f64; 2], site_a: [f64; 2], site_b: [f64; 2], ranges: [f64; 2]) -> Matrix2<f64> {
    Matrix2::new(
        (position[0] - site_a[0]) / ranges[0],
        (position[1] - site_a[1]) / ranges[0],
        (position[0] - site_b[0]) / ranges[1],
        (position[1] - site_b[1]) / ranges[1],
    )
}

#[allow(clippy::too_many_arguments)]
pub fn two_ranges_to_position(
    site_a: [f64; 2],
    site_b: [f64; 2],
    range_a: f64,
    range_b: f64,
    variances: [f64; 2],
    disambiguator: [f64; 2],
    mode: CorrelationMode,
    drop_threshold: f64,
) -> Result<RawPositionEstimate, GeometryError> {
    if site_a == site_b {
        return Err(GeometryError::CoincidentSites);
    }
    if !(range_a.is_finite() && range_b.is_finite()) {
        return Err(GeometryError::NonFinite("range"));
    }
    for r in [range_a, range_b] {
        if r < MIN_RANGE {
            return Err(GeometryError::RangeTooSmall(r));
        }
    }
    check_variance(variances[0])?;
    check_variance(variances[1])?;
    let (dx, dy) = (site_b[0] - site_a[0], site_b[1] - site_a[1]);
    let dist = (dx * dx + dy * dy).sqrt();
    let (ux, uy) = (dx / dist, dy / dist);
    let along = (dist * dist + range_a * range_a - range_b * range_b) / (2.0 * dist);
    let mut h2 = range_a * range_a - along * along;
    let slack = 1e-12 * range_a.max(range_b).powi(2);
    if h2 < 0.0 {
        if h2 < -slack {
            return Ok(RawPositionEstimate::dropped([f64::NAN; 2], 0.0));
        }
        h2 = 0.0;
    }
    let h = h2.sqrt();
    let base = [site_a[0] + along * ux, site_a[1] + along * uy];
    let first = [base[0] - h * uy, base[1] + h * ux];
    let second = [base[0] + h * uy, base[1] - h * ux];
    let dist2 = |p: [f64; 2]| (p[0] - disambiguator[0]).powi(2) + (p[1] - disambiguator[1]).powi(2);
    let position = if dist2(second) < dist2(first) { second } else { first };
    let k = two_range_jacobian(position, site_a, site_b, [range_a, range_b]);
    let weight = rcond_1norm(&k);
    if weight < drop_threshold {
        return Ok(RawPositionEstimate::dropped(position, weight));
    }
    let information = estimate_information(&k, variances, mode) * weight;
    Ok(RawPositionEstimate { position, information, weight, provenance: Provenance::Observed })
}
