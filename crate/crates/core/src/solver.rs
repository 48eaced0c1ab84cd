//! Master-system solve for the shadowing trajectory at a fixed smoothing
//! parameter.
//!
//! The master system `(Abar I + eta Bbar) p = Abar I P` has one row fewer
//! than unknowns per component: eliminating the velocities leaves the initial
//! velocity free. The system is factored once by SVD; the particular
//! minimum-norm solution plus the null space of the factorization span every
//! trajectory consistent with the recurrence and the residual-sum constraint.
//! [`NullSpaceRule`] decides which member of that family is returned.

use nalgebra::{DMatrix, DVector, SVD};
use thiserror::Error;

use crate::grid::{GridError, TimeGrid};
use crate::matrices::FilterMatrices;

pub use crate::eta::{search_eta, search_eta_with, EtaSearchError, EtaSearchOptions, EtaSearchResult};

/// Relative singular-value cutoff for the master-system pseudo-inverse.
pub const DEFAULT_RCOND: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("smoothing parameter must be positive and finite, got {0}")]
    NonPositiveEta(f64),
    #[error("need at least 3 observations with positive weight, got {positive}")]
    DegenerateWeights { positive: usize },
    #[error("information matrix {index} is not symmetric")]
    NonSymmetricInformation { index: usize },
    #[error("information matrix {index} is not positive semidefinite")]
    NotPositiveSemidefinite { index: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("time {t} lies before the start of the trajectory ({start})")]
    BeforeStart { t: f64, start: f64 },
}

/// How the free direction of the underdetermined master system is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NullSpaceRule {
    /// Pick the member that minimises the full objective
    /// `1/2 sum (P-p)' I (P-p) + eta sum tau |a|^2`. This is the exact
    /// stationary point of the constrained problem.
    #[default]
    Optimal,
    /// Plain minimum-norm pseudo-inverse solution. Not translation invariant;
    /// kept to reproduce the uncorrected approximation.
    MinimumNorm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub reversed: bool,
    pub null_space: NullSpaceRule,
    pub rcond: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { reversed: true, null_space: NullSpaceRule::Optimal, rcond: DEFAULT_RCOND }
    }
}

/// Scalar observations `P_i` with weights `sigma_i^-2` (zero marks a placeholder).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarObservationSeries {
    grid: TimeGrid,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl ScalarObservationSeries {
    pub fn new(grid: TimeGrid, values: Vec<f64>, weights: Vec<f64>) -> Result<Self, SolveError> {
        if values.len() != grid.len() || weights.len() != grid.len() {
            return Err(SolveError::ShapeMismatch(format!(
                "{} times, {} values, {} weights",
                grid.len(),
                values.len(),
                weights.len()
            )));
        }
        check_weights(&values, &weights)?;
        Ok(Self { grid, values, weights })
    }

    /// Unit-weight convenience constructor.
    pub fn unweighted(times: &[f64], values: &[f64]) -> Result<Self, SolveError> {
        Self::new(TimeGrid::new(times.to_vec())?, values.to_vec(), vec![1.0; values.len()])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn reversed(&self) -> Self {
        Self {
            grid: self.grid.reversed(),
            values: self.values.iter().rev().copied().collect(),
            weights: self.weights.iter().rev().copied().collect(),
        }
    }
}

fn check_weights(values: &[f64], weights: &[f64]) -> Result<(), SolveError> {
    for (i, (&v, &w)) in values.iter().zip(weights).enumerate() {
        if !w.is_finite() || w < 0.0 {
            return Err(SolveError::NonFinite(format!("weight {i} = {w}")));
        }
        if w > 0.0 && !v.is_finite() {
            return Err(SolveError::NonFinite(format!("value {i} = {v}")));
        }
    }
    let positive = weights.iter().filter(|&&w| w > 0.0).count();
    if positive < 3 {
        return Err(SolveError::DegenerateWeights { positive });
    }
    Ok(())
}

/// d-dimensional observations with per-time information matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorObservationSeries {
    grid: TimeGrid,
    /// (n+1) x d, one row per time.
    values: DMatrix<f64>,
    information: Vec<DMatrix<f64>>,
}

impl VectorObservationSeries {
    pub fn new(grid: TimeGrid, values: DMatrix<f64>, information: Vec<DMatrix<f64>>) -> Result<Self, SolveError> {
        let dim = values.ncols();
        if values.nrows() != grid.len() || information.len() != grid.len() || dim == 0 {
            return Err(SolveError::ShapeMismatch(format!(
                "{} times, {}x{} values, {} information matrices",
                grid.len(),
                values.nrows(),
                dim,
                information.len()
            )));
        }
        let mut positive = 0;
        for (i, info) in information.iter().enumerate() {
            if info.shape() != (dim, dim) {
                return Err(SolveError::ShapeMismatch(format!("information matrix {i} is {:?}", info.shape())));
            }
            if info.iter().any(|v| !v.is_finite()) {
                return Err(SolveError::NonFinite(format!("information matrix {i}")));
            }
            let scale = info.abs().max();
            if (info - info.transpose()).abs().max() > 1e-12 * scale {
                return Err(SolveError::NonSymmetricInformation { index: i });
            }
            if scale > 0.0 {
                let sym = (info + info.transpose()) * 0.5;
                let min_eig = sym.symmetric_eigenvalues().min();
                if min_eig < -1e-12 * scale {
                    return Err(SolveError::NotPositiveSemidefinite { index: i });
                }
                if values.row(i).iter().any(|v| !v.is_finite()) {
                    return Err(SolveError::NonFinite(format!("value row {i}")));
                }
                positive += 1;
            }
        }
        if positive < 3 {
            return Err(SolveError::DegenerateWeights { positive });
        }
        Ok(Self { grid, values, information })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn information(&self) -> &[DMatrix<f64>] {
        &self.information
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn reversed(&self) -> Self {
        let rows = self.values.nrows();
        Self {
            grid: self.grid.reversed(),
            values: DMatrix::from_fn(rows, self.dim(), |i, k| self.values[(rows - 1 - i, k)]),
            information: self.information.iter().rev().cloned().collect(),
        }
    }

    /// Component `k` as a scalar series weighted by the diagonal entry of each
    /// information matrix (cross-component correlation dropped).
    pub fn component(&self, k: usize) -> Result<ScalarObservationSeries, SolveError> {
        let values = self.values.column(k).iter().copied().collect();
        let weights = self.information.iter().map(|m| m[(k, k)]).collect();
        ScalarObservationSeries::new(self.grid.clone(), values, weights)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveDiagnostics {
    /// Numerical rank of the master matrix.
    pub rank: usize,
    /// Dimension of the null space closed by the [`NullSpaceRule`].
    pub null_dim: usize,
    /// Max-abs residual of the master system at the returned positions.
    pub residual: f64,
    pub largest_singular_value: f64,
    pub smallest_kept_singular_value: f64,
}

/// Positions, velocities and per-interval accelerations of an estimated
/// trajectory. Rows index time; columns index spatial components.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowingTrajectory {
    pub grid: TimeGrid,
    pub positions: DMatrix<f64>,
    pub velocities: DMatrix<f64>,
    pub accelerations: DMatrix<f64>,
    pub eta: f64,
    pub diagnostics: SolveDiagnostics,
}

/// Value of the quadratic spline at some time.
#[derive(Debug, Clone, PartialEq)]
pub struct SplinePoint {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    /// `t` lies after the last knot; the value continues at constant velocity.
    pub extrapolated: bool,
}

impl ShadowingTrajectory {
    pub fn dim(&self) -> usize {
        self.positions.ncols()
    }

    pub fn len(&self) -> usize {
        self.positions.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.nrows() == 0
    }

    pub fn times(&self) -> &[f64] {
        self.grid.times()
    }

    pub fn position(&self, i: usize) -> Vec<f64> {
        self.positions.row(i).iter().copied().collect()
    }

    pub fn velocity(&self, i: usize) -> Vec<f64> {
        self.velocities.row(i).iter().copied().collect()
    }

    /// Scalar positions (first component).
    pub fn scalar_positions(&self) -> Vec<f64> {
        self.positions.column(0).iter().copied().collect()
    }

    pub fn scalar_accelerations(&self) -> Vec<f64> {
        self.accelerations.column(0).iter().copied().collect()
    }

    pub fn last_position(&self) -> Vec<f64> {
        self.position(self.len() - 1)
    }

    pub fn last_velocity(&self) -> Vec<f64> {
        self.velocity(self.len() - 1)
    }

    pub fn rms_acceleration(&self) -> f64 {
        rms_acceleration(self)
    }

    pub fn evaluate(&self, t: f64) -> Result<SplinePoint, SolveError> {
        evaluate_spline(self, t)
    }

    /// Weighted square error `sum (P_i - p_i)^2 w_i` against scalar data.
    pub fn weighted_square_error(&self, obs: &ScalarObservationSeries) -> f64 {
        obs.values()
            .iter()
            .zip(obs.weights())
            .zip(self.positions.column(0).iter())
            .map(|((v, w), p)| w * (v - p) * (v - p))
            .sum()
    }
}

/// Root-mean-square acceleration `sqrt(sum tau_i |a_i|^2 / (t_n - t_0))`.
pub fn rms_acceleration(traj: &ShadowingTrajectory) -> f64 {
    let gaps = traj.grid.gaps();
    let total: f64 = traj.accelerations.row_iter().zip(gaps).map(|(a, tau)| tau * a.norm_squared()).sum();
    (total / traj.grid.span()).sqrt()
}

/// `p(t) = p_i + v_i (t - t_i) + a_i (t - t_i)^2 / 2` on `[t_i, t_{i+1}]`; past
/// the last knot the trajectory continues at constant velocity.
pub fn evaluate_spline(traj: &ShadowingTrajectory, t: f64) -> Result<SplinePoint, SolveError> {
    let times = traj.grid.times();
    let dim = traj.dim();
    let n = times.len() - 1;
    if !t.is_finite() {
        return Err(SolveError::NonFinite(format!("evaluation time {t}")));
    }
    if t < times[0] {
        return Err(SolveError::BeforeStart { t, start: times[0] });
    }
    if t > times[n] {
        let dt = t - times[n];
        let position = (0..dim).map(|k| traj.positions[(n, k)] + traj.velocities[(n, k)] * dt).collect();
        return Ok(SplinePoint { position, velocity: traj.velocity(n), extrapolated: true });
    }
    if t == times[n] {
        return Ok(SplinePoint { position: traj.position(n), velocity: traj.velocity(n), extrapolated: false });
    }
    // last knot not after t
    let i = times.partition_point(|&ti| ti <= t) - 1;
    let dt = t - times[i];
    let position = (0..dim)
        .map(|k| traj.positions[(i, k)] + traj.velocities[(i, k)] * dt + 0.5 * traj.accelerations[(i, k)] * dt * dt)
        .collect();
    let velocity = (0..dim).map(|k| traj.velocities[(i, k)] + traj.accelerations[(i, k)] * dt).collect();
    Ok(SplinePoint { position, velocity, extrapolated: false })
}

fn check_eta(eta: f64) -> Result<(), SolveError> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(SolveError::NonPositiveEta(eta))
    }
}

/// Filter matrices plus the information operator, assembled for one solve.
struct MasterSystem<'a> {
    fm: &'a FilterMatrices,
    /// Block-diagonal information, N x N.
    info: DMatrix<f64>,
    /// Observations, N x c (c right-hand sides).
    obs: DMatrix<f64>,
    eta: f64,
}

struct MasterSolution {
    positions: DMatrix<f64>,
    accelerations: DMatrix<f64>,
    diagnostics: SolveDiagnostics,
}

impl MasterSystem<'_> {
    fn solve(&self, opts: &SolveOptions) -> MasterSolution {
        let fm = self.fm;
        let unknowns = self.info.nrows();
        let k = &fm.abar * &self.info + &fm.bbar * self.eta;
        let rhs = &fm.abar * &self.info * &self.obs;

        // pad to square so the SVD returns a full right basis
        let rows = k.nrows();
        let padded = k.clone().resize(unknowns, unknowns, 0.0);
        let svd = SVD::new(padded, true, true);
        let u = svd.u.as_ref().expect("u requested");
        let v_t = svd.v_t.as_ref().expect("v_t requested");
        let sigma = &svd.singular_values;
        let sigma_max = sigma.max();
        let cutoff = opts.rcond * sigma_max;

        let kept: Vec<usize> = (0..unknowns).filter(|&i| sigma[i] > cutoff).collect();
        let null: Vec<usize> = (0..unknowns).filter(|&i| sigma[i] <= cutoff).collect();

        let mut rhs_padded = DMatrix::zeros(unknowns, rhs.ncols());
        rhs_padded.rows_mut(0, rows).copy_from(&rhs);
        let mut p = DMatrix::zeros(unknowns, rhs.ncols());
        for &i in &kept {
            let coeff = u.column(i).transpose() * &rhs_padded / sigma[i];
            p += v_t.row(i).transpose() * coeff;
        }

        if opts.null_space == NullSpaceRule::Optimal && !null.is_empty() {
            let z = DMatrix::from_fn(unknowns, null.len(), |r, c| v_t[(null[c], r)]);
            let qi = &fm.q * &self.info;
            let s = &self.info + qi.transpose() * &fm.tau * &qi * (0.5 / self.eta);
            let h = z.transpose() * &s * &z;
            let h_pinv = pseudo_inverse(&h, opts.rcond);
            let shift = &z * h_pinv * z.transpose() * &s * (&self.obs - &p);
            p += shift;
        }

        let accelerations = &fm.q * &self.info * (&self.obs - &p) * (0.5 / self.eta);
        let residual = (&k * &p - &rhs).abs().max();
        let smallest = kept.iter().map(|&i| sigma[i]).fold(f64::INFINITY, f64::min);
        MasterSolution {
            positions: p,
            accelerations,
            diagnostics: SolveDiagnostics {
                rank: kept.len(),
                null_dim: null.len(),
                residual,
                largest_singular_value: sigma_max,
                smallest_kept_singular_value: smallest,
            },
        }
    }
}

/// Pseudo-inverse with a cutoff relative to the largest singular value.
pub(crate) fn pseudo_inverse(m: &DMatrix<f64>, rcond: f64) -> DMatrix<f64> {
    let svd = SVD::new(m.clone(), true, true);
    let cutoff = rcond * svd.singular_values.max();
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            out += v_t.row(i).transpose() * u.column(i).transpose() / s;
        }
    }
    out
}

/// `v_i = (p_{i+1} - p_i)/tau_i - a_i tau_i / 2` and `v_n = v_{n-1} + a_{n-1} tau_{n-1}`.
fn recover_velocities(grid: &TimeGrid, positions: &DMatrix<f64>, accelerations: &DMatrix<f64>) -> DMatrix<f64> {
    let gaps = grid.gaps();
    let n = gaps.len();
    let dim = positions.ncols();
    let mut v = DMatrix::zeros(n + 1, dim);
    for i in 0..n {
        for k in 0..dim {
            v[(i, k)] = (positions[(i + 1, k)] - positions[(i, k)]) / gaps[i] - 0.5 * accelerations[(i, k)] * gaps[i];
        }
    }
    for k in 0..dim {
        v[(n, k)] = v[(n - 1, k)] + accelerations[(n - 1, k)] * gaps[n - 1];
    }
    v
}

/// Accelerations from solved positions: `a = (2 eta)^-1 Q I (P - p)`.
pub fn recover_accelerations(
    positions: &[f64],
    obs: &ScalarObservationSeries,
    eta: f64,
    fm: &FilterMatrices,
) -> Result<Vec<f64>, SolveError> {
    check_eta(eta)?;
    if positions.len() != obs.values().len() || fm.q.ncols() != positions.len() {
        return Err(SolveError::ShapeMismatch(format!(
            "{} positions for {} observations",
            positions.len(),
            obs.values().len()
        )));
    }
    let residual: Vec<f64> =
        obs.values().iter().zip(obs.weights()).zip(positions).map(|((v, w), p)| w * (v - p)).collect();
    let a = &fm.q * DVector::from_vec(residual) * (0.5 / eta);
    Ok(a.iter().copied().collect())
}

/// Solves `d` scalar problems that share a grid and weight profile with one
/// factorization. `values` is (n+1) x d.
pub fn solve_scalar_multi(
    grid: &TimeGrid,
    weights: &[f64],
    values: &DMatrix<f64>,
    eta: f64,
    opts: &SolveOptions,
) -> Result<Vec<ShadowingTrajectory>, SolveError> {
    check_eta(eta)?;
    if values.nrows() != grid.len() || weights.len() != grid.len() {
        return Err(SolveError::ShapeMismatch(format!(
            "{} times, {} value rows, {} weights",
            grid.len(),
            values.nrows(),
            weights.len()
        )));
    }
    for k in 0..values.ncols() {
        let col: Vec<f64> = values.column(k).iter().copied().collect();
        check_weights(&col, weights)?;
    }
    let fm = FilterMatrices::build(grid, opts.reversed);
    // placeholders may hold junk; they carry no weight
    let obs =
        DMatrix::from_fn(values.nrows(), values.ncols(), |i, k| if weights[i] > 0.0 { values[(i, k)] } else { 0.0 });
    let system = MasterSystem { fm: &fm, info: DMatrix::from_diagonal(&DVector::from_column_slice(weights)), obs, eta };
    let sol = system.solve(opts);
    Ok((0..values.ncols())
        .map(|k| {
            let positions = DMatrix::from_column_slice(grid.len(), 1, sol.positions.column(k).as_slice());
            let accelerations = DMatrix::from_column_slice(grid.intervals(), 1, sol.accelerations.column(k).as_slice());
            let velocities = recover_velocities(grid, &positions, &accelerations);
            ShadowingTrajectory {
                grid: grid.clone(),
                positions,
                velocities,
                accelerations,
                eta,
                diagnostics: sol.diagnostics,
            }
        })
        .collect())
}

pub fn solve_scalar(obs: &ScalarObservationSeries, eta: f64) -> Result<ShadowingTrajectory, SolveError> {
    solve_scalar_with(obs, eta, &SolveOptions::default())
}

pub fn solve_scalar_with(
    obs: &ScalarObservationSeries,
    eta: f64,
    opts: &SolveOptions,
) -> Result<ShadowingTrajectory, SolveError> {
    let values = DMatrix::from_column_slice(obs.values().len(), 1, obs.values());
    let mut out = solve_scalar_multi(obs.grid(), obs.weights(), &values, eta, opts)?;
    Ok(out.remove(0))
}

pub fn solve_vector(obs: &VectorObservationSeries, eta: f64) -> Result<ShadowingTrajectory, SolveError> {
    solve_vector_with(obs, eta, &SolveOptions::default())
}

/// Block solve with full information matrices.
pub fn solve_vector_with(
    obs: &VectorObservationSeries,
    eta: f64,
    opts: &SolveOptions,
) -> Result<ShadowingTrajectory, SolveError> {
    check_eta(eta)?;
    let dim = obs.dim();
    let grid = obs.grid();
    let points = grid.len();
    let fm = FilterMatrices::build(grid, opts.reversed).expand(dim);
    let mut info = DMatrix::zeros(points * dim, points * dim);
    let mut stacked = DMatrix::zeros(points * dim, 1);
    for (i, block) in obs.information().iter().enumerate() {
        let sym = (block + block.transpose()) * 0.5;
        info.view_mut((i * dim, i * dim), (dim, dim)).copy_from(&sym);
        if block.abs().max() > 0.0 {
            for k in 0..dim {
                stacked[(i * dim + k, 0)] = obs.values()[(i, k)];
            }
        }
    }
    let system = MasterSystem { fm: &fm, info, obs: stacked, eta };
    let sol = system.solve(opts);
    let positions = DMatrix::from_fn(points, dim, |i, k| sol.positions[(i * dim + k, 0)]);
    let accelerations = DMatrix::from_fn(grid.intervals(), dim, |i, k| sol.accelerations[(i * dim + k, 0)]);
    let velocities = recover_velocities(grid, &positions, &accelerations);
    Ok(ShadowingTrajectory {
        grid: grid.clone(),
        positions,
        velocities,
        accelerations,
        eta,
        diagnostics: sol.diagnostics,
    })
}

/// Per-component scalar solves using only the diagonal of each information
/// matrix. Components with identical weight profiles share one factorization.
pub fn solve_per_component(
    obs: &VectorObservationSeries,
    eta: f64,
    opts: &SolveOptions,
) -> Result<ShadowingTrajectory, SolveError> {
    check_eta(eta)?;
    let dim = obs.dim();
    let grid = obs.grid();
    let weights: Vec<Vec<f64>> = (0..dim).map(|k| obs.information().iter().map(|m| m[(k, k)]).collect()).collect();
    let mut parts: Vec<Option<ShadowingTrajectory>> = vec![None; dim];
    for k in 0..dim {
        if parts[k].is_some() {
            continue;
        }
        let group: Vec<usize> = (k..dim).filter(|&j| parts[j].is_none() && weights[j] == weights[k]).collect();
        let values = DMatrix::from_fn(grid.len(), group.len(), |i, c| obs.values()[(i, group[c])]);
        let solved = solve_scalar_multi(grid, &weights[k], &values, eta, opts)?;
        for (j, traj) in group.into_iter().zip(solved) {
            parts[j] = Some(traj);
        }
    }
    let parts: Vec<ShadowingTrajectory> = parts.into_iter().map(|p| p.expect("every component solved")).collect();
    let join = |f: &dyn Fn(&ShadowingTrajectory) -> &DMatrix<f64>| {
        let rows = f(&parts[0]).nrows();
        DMatrix::from_fn(rows, dim, |i, k| f(&parts[k])[(i, 0)])
    };
    let diagnostics =
        parts.iter().map(|p| p.diagnostics).max_by(|a, b| a.residual.total_cmp(&b.residual)).expect("dim >= 1");
    Ok(ShadowingTrajectory {
        grid: grid.clone(),
        positions: join(&|p| &p.positions),
        velocities: join(&|p| &p.velocities),
        accelerations: join(&|p| &p.accelerations),
        eta,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_time_grid;
    use approx::assert_relative_eq;

    fn series(times: &[f64], values: &[f64]) -> ScalarObservationSeries {
        ScalarObservationSeries::unweighted(times, values).unwrap()
    }

    fn lcg(seed: u64) -> impl FnMut() -> f64 {
        let mut s = seed;
        move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        }
    }

    #[test]
    fn linear_data_is_reproduced_for_every_eta() {
        let t: Vec<f64> = (0..15).map(f64::from).collect();
        let p: Vec<f64> = t.iter().map(|t| 2.0 + 3.0 * t).collect();
        for eta in [0.1, 1.0, 1000.0] {
            let traj = solve_scalar(&series(&t, &p), eta).unwrap();
            for (x, y) in traj.scalar_positions().iter().zip(&p) {
                assert_relative_eq!(x, y, max_relative = 1e-9);
            }
            assert!(traj.scalar_accelerations().iter().all(|a| a.abs() < 1e-9));
            assert_relative_eq!(traj.velocity(7)[0], 3.0, max_relative = 1e-9);
        }
    }

    #[test]
    fn rejects_bad_eta_and_sparse_weights() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let obs = series(&t, &[1.0, 2.0, 3.0, 5.0]);
        assert_eq!(solve_scalar(&obs, 0.0), Err(SolveError::NonPositiveEta(0.0)));
        assert!(matches!(solve_scalar(&obs, -1.0), Err(SolveError::NonPositiveEta(_))));
        let grid = build_time_grid(&t).unwrap();
        let err = ScalarObservationSeries::new(grid, vec![1.0; 4], vec![1.0, 0.0, 0.0, 1.0]).unwrap_err();
        assert_eq!(err, SolveError::DegenerateWeights { positive: 2 });
    }

    #[test]
    fn dynamics_and_extended_constraint_hold() {
        let mut rng = lcg(3);
        let t: Vec<f64> = (0..25).map(|i| i as f64 * 0.7 + 0.2 * (i % 3) as f64).collect();
        let p: Vec<f64> = t.iter().map(|t| (t / 3.0).sin() * 4.0 + rng()).collect();
        let w: Vec<f64> = (0..25).map(|_| 1.0 + 0.5 * rng()).collect();
        let obs = ScalarObservationSeries::new(build_time_grid(&t).unwrap(), p.clone(), w.clone()).unwrap();
        for rule in [NullSpaceRule::Optimal, NullSpaceRule::MinimumNorm] {
            let opts = SolveOptions { null_space: rule, ..Default::default() };
            let traj = solve_scalar_with(&obs, 5.0, &opts).unwrap();
            let pos = traj.scalar_positions();
            let acc = traj.scalar_accelerations();
            let gaps = obs.grid().gaps();
            let scale = pos.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for i in 0..gaps.len() {
                let v = traj.velocities[(i, 0)];
                let next = pos[i] + v * gaps[i] + 0.5 * acc[i] * gaps[i] * gaps[i];
                assert!((next - pos[i + 1]).abs() <= 1e-8 * scale);
                let vnext = v + acc[i] * gaps[i];
                assert!((vnext - traj.velocities[(i + 1, 0)]).abs() <= 1e-8 * scale.max(1.0));
            }
            let sum: f64 = w.iter().zip(&p).zip(&pos).map(|((w, o), x)| w * (o - x)).sum();
            let total: f64 = w.iter().zip(&p).map(|(w, o)| w * o.abs()).sum();
            assert!(sum.abs() <= 1e-8 * total, "{rule:?}: {sum}");
        }
    }

    #[test]
    fn recurrence_holds_with_g_and_b() {
        let mut rng = lcg(11);
        let t: Vec<f64> = (0..12).map(|i| i as f64 + 0.3 * rng()).collect();
        let p: Vec<f64> = t.iter().map(|t| t * t * 0.1 + rng()).collect();
        let obs = series(&t, &p);
        let traj = solve_scalar(&obs, 2.0).unwrap();
        let fm = FilterMatrices::build(obs.grid(), true);
        let lhs = &fm.b * DVector::from_vec(traj.scalar_positions());
        let rhs = &fm.g * DVector::from_vec(traj.scalar_accelerations()) * 0.5;
        assert!((lhs - rhs).abs().max() < 1e-8 * 10.0);
    }

    #[test]
    fn recover_accelerations_matches_solver_output() {
        let mut rng = lcg(5);
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let p: Vec<f64> = t.iter().map(|_| rng() * 3.0).collect();
        let obs = series(&t, &p);
        let traj = solve_scalar(&obs, 1.5).unwrap();
        let fm = FilterMatrices::build(obs.grid(), true);
        let a = recover_accelerations(&traj.scalar_positions(), &obs, 1.5, &fm).unwrap();
        for (x, y) in a.iter().zip(traj.scalar_accelerations()) {
            assert_relative_eq!(*x, y, epsilon = 1e-12);
        }
        let lin: Vec<f64> = t.iter().map(|t| 1.0 - t).collect();
        let a0 = recover_accelerations(&lin, &series(&t, &lin), 1.0, &fm).unwrap();
        assert!(a0.iter().all(|a| *a == 0.0));
        assert!(matches!(recover_accelerations(&lin, &series(&t, &lin), 0.0, &fm), Err(SolveError::NonPositiveEta(_))));
    }

    #[test]
    fn rms_acceleration_definition() {
        let grid = build_time_grid(&[0.0, 2.0, 3.0]).unwrap();
        let mk = |acc: Vec<f64>| ShadowingTrajectory {
            grid: grid.clone(),
            positions: DMatrix::zeros(3, 1),
            velocities: DMatrix::zeros(3, 1),
            accelerations: DMatrix::from_vec(2, 1, acc),
            eta: 1.0,
            diagnostics: SolveDiagnostics {
                rank: 2,
                null_dim: 1,
                residual: 0.0,
                largest_singular_value: 1.0,
                smallest_kept_singular_value: 1.0,
            },
        };
        assert_eq!(rms_acceleration(&mk(vec![0.0, 0.0])), 0.0);
        assert_relative_eq!(rms_acceleration(&mk(vec![2.0, 2.0])), 2.0);
        // sqrt((2*1 + 1*4)/3)
        assert_relative_eq!(rms_acceleration(&mk(vec![1.0, 2.0])), 2.0f64.sqrt());
    }

    #[test]
    fn spline_knots_midpoints_and_extrapolation() {
        let t: Vec<f64> = (0..8).map(f64::from).collect();
        let p: Vec<f64> = t.iter().map(|t| (t * 0.9).cos() * 2.0).collect();
        let traj = solve_scalar(&series(&t, &p), 0.5).unwrap();
        for (i, ti) in t.iter().enumerate() {
            assert_eq!(traj.evaluate(*ti).unwrap().position[0], traj.positions[(i, 0)]);
        }
        let scale = 2.0;
        for i in 0..t.len() - 1 {
            let dt = 1.0;
            let end =
                traj.positions[(i, 0)] + traj.velocities[(i, 0)] * dt + 0.5 * traj.accelerations[(i, 0)] * dt * dt;
            assert!((end - traj.positions[(i + 1, 0)]).abs() < 1e-8 * scale);
        }
        let beyond = traj.evaluate(9.5).unwrap();
        assert!(beyond.extrapolated);
        let expected = traj.positions[(7, 0)] + traj.velocities[(7, 0)] * 2.5;
        assert_relative_eq!(beyond.position[0], expected, epsilon = 1e-12);
        assert!(matches!(traj.evaluate(-0.1), Err(SolveError::BeforeStart { .. })));

        let lin: Vec<f64> = t.iter().map(|t| 4.0 - 0.5 * t).collect();
        let flat = solve_scalar(&series(&t, &lin), 3.0).unwrap();
        let mid = flat.evaluate(2.5).unwrap().position[0];
        let avg = 0.5 * (flat.positions[(2, 0)] + flat.positions[(3, 0)]);
        assert_relative_eq!(mid, avg, epsilon = 1e-9);
    }

    #[test]
    fn zero_weight_placeholder_matches_coalesced_grid_on_linear_data() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let p: Vec<f64> = t.iter().map(|t| 1.0 + 0.25 * t).collect();
        let mut w = vec![1.0; 10];
        w[4] = 0.0;
        let mut junk = p.clone();
        junk[4] = 1e6;
        let placeholder =
            solve_scalar(&ScalarObservationSeries::new(build_time_grid(&t).unwrap(), junk, w).unwrap(), 10.0).unwrap();
        let kept: Vec<usize> = (0..10).filter(|&i| i != 4).collect();
        let tc: Vec<f64> = kept.iter().map(|&i| t[i]).collect();
        let pc: Vec<f64> = kept.iter().map(|&i| p[i]).collect();
        let coalesced = solve_scalar(&series(&tc, &pc), 10.0).unwrap();
        for (k, &i) in kept.iter().enumerate() {
            assert!((placeholder.positions[(i, 0)] - coalesced.positions[(k, 0)]).abs() < 1e-8);
        }
        assert!((placeholder.positions[(4, 0)] - p[4]).abs() < 1e-8);
    }

    #[test]
    fn multi_column_matches_individual_solves() {
        let mut rng = lcg(21);
        let t: Vec<f64> = (0..14).map(f64::from).collect();
        let grid = build_time_grid(&t).unwrap();
        let w: Vec<f64> = (0..14).map(|_| 1.0 + 0.5 * rng()).collect();
        let values = DMatrix::from_fn(14, 3, |_, _| rng() * 5.0);
        let opts = SolveOptions::default();
        let multi = solve_scalar_multi(&grid, &w, &values, 7.0, &opts).unwrap();
        for (k, column) in multi.iter().enumerate() {
            let obs = ScalarObservationSeries::new(grid.clone(), values.column(k).iter().copied().collect(), w.clone())
                .unwrap();
            let single = solve_scalar(&obs, 7.0).unwrap();
            assert!((&single.positions - &column.positions).abs().max() <= 1e-12);
            assert!((&single.accelerations - &column.accelerations).abs().max() <= 1e-12);
        }
        let bad = DMatrix::zeros(13, 2);
        assert!(matches!(solve_scalar_multi(&grid, &w, &bad, 1.0, &opts), Err(SolveError::ShapeMismatch(_))));
    }

    #[test]
    fn identical_columns_give_identical_trajectories() {
        let t: Vec<f64> = (0..9).map(f64::from).collect();
        let grid = build_time_grid(&t).unwrap();
        let col: Vec<f64> = t.iter().map(|t| (t * 0.7).sin()).collect();
        let values = DMatrix::from_fn(9, 2, |i, _| col[i]);
        let out = solve_scalar_multi(&grid, &[1.0; 9], &values, 2.0, &SolveOptions::default()).unwrap();
        assert_eq!(out[0].positions, out[1].positions);
    }

    #[test]
    fn vector_series_validation() {
        let grid = build_time_grid(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        let values = DMatrix::zeros(4, 2);
        let mut info = vec![DMatrix::<f64>::identity(2, 2); 4];
        info[1] = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert_eq!(
            VectorObservationSeries::new(grid.clone(), values.clone(), info).unwrap_err(),
            SolveError::NonSymmetricInformation { index: 1 }
        );
        let mut info = vec![DMatrix::<f64>::identity(2, 2); 4];
        info[2] = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(
            VectorObservationSeries::new(grid, values, info).unwrap_err(),
            SolveError::NotPositiveSemidefinite { index: 2 }
        );
    }

    #[test]
    fn solves_are_bitwise_deterministic() {
        let mut rng = lcg(8);
        let t: Vec<f64> = (0..30).map(f64::from).collect();
        let p: Vec<f64> = t.iter().map(|_| rng()).collect();
        let a = solve_scalar(&series(&t, &p), 12.0).unwrap();
        let b = solve_scalar(&series(&t, &p), 12.0).unwrap();
        assert_eq!(a, b);
    }
}
