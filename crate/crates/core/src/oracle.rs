//! Direct dense solve of the full stationarity system in
//! `(p, v, a, lambda, mu)`; a reference for the master-system solver.
//!
//! Unlike the master system nothing is eliminated, so the result is the exact
//! stationary point. The system includes `dL/dv_n = mu_{n-1} = 0`, which makes
//! it square: `(5n + 2) d` unknowns and equations.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::solver::{ScalarObservationSeries, VectorObservationSeries};

pub const MAX_ORACLE_INTERVALS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("stationarity system is singular (reciprocal condition {rcond:e})")]
    SingularSystem { rcond: f64 },
    #[error("oracle is limited to {MAX_ORACLE_INTERVALS} intervals, got {0}")]
    TooLarge(usize),
    #[error("smoothing parameter must be positive and finite, got {0}")]
    NonPositiveEta(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub positions: DMatrix<f64>,
    pub velocities: DMatrix<f64>,
    pub accelerations: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub mu: DMatrix<f64>,
    pub eta: f64,
    /// `|K x - r|_inf / (|K|_inf |x|_inf + |r|_inf)` of the stationarity system.
    pub relative_residual: f64,
    pub rcond: f64,
}

impl OracleSolution {
    pub fn scalar_positions(&self) -> Vec<f64> {
        self.positions.column(0).iter().copied().collect()
    }

    pub fn scalar_accelerations(&self) -> Vec<f64> {
        self.accelerations.column(0).iter().copied().collect()
    }
}

pub fn solve_kkt_oracle(obs: &ScalarObservationSeries, eta: f64) -> Result<OracleSolution, OracleError> {
    let info: Vec<DMatrix<f64>> = obs.weights().iter().map(|&w| DMatrix::from_element(1, 1, w)).collect();
    let values = DMatrix::from_column_slice(obs.values().len(), 1, obs.values());
    assemble_and_solve(obs.grid().gaps(), &values, &info, eta)
}

pub fn solve_kkt_oracle_vector(obs: &VectorObservationSeries, eta: f64) -> Result<OracleSolution, OracleError> {
    assemble_and_solve(obs.grid().gaps(), obs.values(), obs.information(), eta)
}

#[allow(clippy::needless_range_loop)]
fn assemble_and_solve(
    gaps: &[f64],
    values: &DMatrix<f64>,
    info: &[DMatrix<f64>],
    eta: f64,
) -> Result<OracleSolution, OracleError> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(OracleError::NonPositiveEta(eta));
    }
    let n = gaps.len();
    if n > MAX_ORACLE_INTERVALS {
        return Err(OracleError::TooLarge(n));
    }
    let d = values.ncols();
    let size = (5 * n + 2) * d;
    // variable block offsets (in units of d)
    let p = |i: usize| i * d;
    let v = |i: usize| (n + 1 + i) * d;
    let a = |i: usize| (2 * n + 2 + i) * d;
    let lam = |i: usize| (3 * n + 2 + i) * d;
    let mu = |i: usize| (4 * n + 2 + i) * d;

    let mut k = DMatrix::<f64>::zeros(size, size);
    let mut r = DVector::<f64>::zeros(size);
    let mut row = 0;
    let put_identity = |k: &mut DMatrix<f64>, row: usize, col: usize, scale: f64| {
        for c in 0..d {
            k[(row + c, col + c)] += scale;
        }
    };

    // dL/dp_i: I_i p_i - lambda_i + lambda_{i-1} = I_i P_i
    for i in 0..=n {
        k.view_mut((row, p(i)), (d, d)).copy_from(&info[i]);
        let rhs = &info[i] * values.row(i).transpose();
        r.rows_mut(row, d).copy_from(&rhs);
        if i < n {
            put_identity(&mut k, row, lam(i), -1.0);
        }
        if i > 0 {
            put_identity(&mut k, row, lam(i - 1), 1.0);
        }
        row += d;
    }
    // dL/dv_i: -tau_i lambda_i - mu_i + mu_{i-1} = 0
    for i in 0..=n {
        if i < n {
            put_identity(&mut k, row, lam(i), -gaps[i]);
            put_identity(&mut k, row, mu(i), -1.0);
        }
        if i > 0 {
            put_identity(&mut k, row, mu(i - 1), 1.0);
        }
        row += d;
    }
    // dL/da_i: -tau_i^2 lambda_i / 2 - tau_i mu_i + 2 eta tau_i a_i = 0
    for i in 0..n {
        put_identity(&mut k, row, lam(i), -0.5 * gaps[i] * gaps[i]);
        put_identity(&mut k, row, mu(i), -gaps[i]);
        put_identity(&mut k, row, a(i), 2.0 * eta * gaps[i]);
        row += d;
    }
    // dL/dlambda_i: p_{i+1} - p_i - tau_i v_i - tau_i^2 a_i / 2 = 0
    for i in 0..n {
        put_identity(&mut k, row, p(i + 1), 1.0);
        put_identity(&mut k, row, p(i), -1.0);
        put_identity(&mut k, row, v(i), -gaps[i]);
        put_identity(&mut k, row, a(i), -0.5 * gaps[i] * gaps[i]);
        row += d;
    }
    // dL/dmu_i: v_{i+1} - v_i - tau_i a_i = 0
    for i in 0..n {
        put_identity(&mut k, row, v(i + 1), 1.0);
        put_identity(&mut k, row, v(i), -1.0);
        put_identity(&mut k, row, a(i), -gaps[i]);
        row += d;
    }
    debug_assert_eq!(row, size);

    let sv = k.clone().singular_values();
    let rcond = sv.min() / sv.max();
    if rcond.is_nan() || rcond <= 1e-15 {
        return Err(OracleError::SingularSystem { rcond });
    }
    let x = k.clone().lu().solve(&r).ok_or(OracleError::SingularSystem { rcond })?;
    let residual = (&k * &x - &r).abs().max();
    let scale = k.abs().row_sum().max() * x.abs().max() + r.abs().max();
    let relative_residual = if scale > 0.0 { residual / scale } else { 0.0 };

    let take = |offset: usize, count: usize| DMatrix::from_fn(count, d, |i, c| x[offset + i * d + c]);
    Ok(OracleSolution {
        positions: take(p(0), n + 1),
        velocities: take(v(0), n + 1),
        accelerations: take(a(0), n),
        lambda: take(lam(0), n),
        mu: take(mu(0), n),
        eta,
        relative_residual,
        rcond,
    })
}
