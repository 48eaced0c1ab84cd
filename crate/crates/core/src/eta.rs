//! Smoothing-parameter search for a target RMS acceleration.
//!
//! `xi(eta)` decreases monotonically, so the search runs a bracketing root
//! search on `log10(eta)`.

use thiserror::Error;

use crate::root::brent;
use crate::solver::{solve_scalar_with, ScalarObservationSeries, SolveError, SolveOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EtaSearchError {
    #[error("bracket [{eta_lo}, {eta_hi}] gives xi in [{xi_hi}, {xi_lo}], which does not contain the target {target}")]
    BracketDoesNotStraddle { eta_lo: f64, eta_hi: f64, xi_lo: f64, xi_hi: f64, target: f64 },
    #[error("invalid bracket [{0}, {1}]")]
    InvalidBracket(f64, f64),
    #[error("no eta within tolerance after {iterations} iterations (best eta {eta}, xi {xi})")]
    MaxIterations { iterations: usize, eta: f64, xi: f64 },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaSearchOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iter: usize,
    pub solve: SolveOptions,
}

impl Default for EtaSearchOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-3, abs_tol: 1e-12, max_iter: 100, solve: SolveOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EtaSearchResult {
    pub eta: f64,
    pub xi: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
    /// Every `(eta, xi)` evaluated, in evaluation order.
    pub trace: Vec<(f64, f64)>,
}

pub fn search_eta(
    obs: &ScalarObservationSeries,
    xi_target: f64,
    bracket: (f64, f64),
    opts: &EtaSearchOptions,
) -> Result<EtaSearchResult, EtaSearchError> {
    let solve = opts.solve;
    search_eta_with(|eta| Ok(solve_scalar_with(obs, eta, &solve)?.rms_acceleration()), xi_target, bracket, opts)
}

/// Same search over any `eta -> xi` map (e.g. a block vector solve).
pub fn search_eta_with(
    mut xi_of: impl FnMut(f64) -> Result<f64, SolveError>,
    xi_target: f64,
    (eta_lo, eta_hi): (f64, f64),
    opts: &EtaSearchOptions,
) -> Result<EtaSearchResult, EtaSearchError> {
    if !(eta_lo > 0.0 && eta_hi > eta_lo && eta_hi.is_finite()) {
        return Err(EtaSearchError::InvalidBracket(eta_lo, eta_hi));
    }
    let mut trace = Vec::new();
    let mut eval = |eta: f64, trace: &mut Vec<(f64, f64)>| -> Result<f64, SolveError> {
        let xi = xi_of(eta)?;
        trace.push((eta, xi));
        Ok(xi)
    };
    let xi_lo = eval(eta_lo, &mut trace)?;
    let xi_hi = eval(eta_hi, &mut trace)?;
    let tol = (opts.rel_tol * xi_target).max(opts.abs_tol);
    let done = |eta: f64, xi: f64, iterations: usize, trace: Vec<(f64, f64)>| EtaSearchResult {
        eta,
        xi,
        iterations,
        bracket: (eta_lo, eta_hi),
        trace,
    };

    // zero-acceleration data: the bound holds everywhere, take the smoothest
    if xi_lo <= opts.abs_tol && xi_target > 0.0 {
        return Ok(done(eta_hi, xi_hi, 0, trace));
    }
    let straddles = xi_target.is_finite() && xi_lo >= xi_target - tol && xi_hi <= xi_target + tol;
    if !straddles || xi_target <= 0.0 {
        return Err(EtaSearchError::BracketDoesNotStraddle { eta_lo, eta_hi, xi_lo, xi_hi, target: xi_target });
    }

    let (log_lo, log_hi) = (eta_lo.log10(), eta_hi.log10());
    let outcome = brent(
        |x| eval(10f64.powf(x), &mut trace).map(|xi| xi - xi_target),
        log_lo,
        log_hi,
        xi_lo - xi_target,
        xi_hi - xi_target,
        tol,
        0.0,
        opts.max_iter,
    )?;
    let eta = 10f64.powf(outcome.x);
    let eta = if outcome.iterations == 0 {
        if outcome.x == log_lo {
            eta_lo
        } else {
            eta_hi
        }
    } else {
        eta
    };
    let xi = outcome.fx + xi_target;
    if !outcome.converged {
        return Err(EtaSearchError::MaxIterations { iterations: outcome.iterations, eta, xi });
    }
    Ok(done(eta, xi, outcome.iterations, trace))
}
