//! Shadowing-filter tracking of a maneuvering point object.
//!
//! The filter finds one dynamically consistent trajectory (piecewise-constant
//! acceleration, continuous velocity) that stays close to a whole window of
//! noisy observations, trading residual against mean-square acceleration via
//! the smoothing parameter `eta`. Everything reduces to dense linear algebra
//! on window-sized matrices.
//!
//! Layout:
//! - [`grid`] and [`matrices`]: time grids and the structured filter matrices.
//! - [`solver`]: the master-system solve, acceleration/velocity recovery,
//!   spline evaluation and the `eta` search; [`oracle`] holds the full
//!   stationarity-system solver used to check it.
//! - [`geometry`]: range/bearing transforms into raw Cartesian estimates.
//! - [`tracker`]: sliding-window sequential estimation.
//! - [`scenario`]: seeded synthetic scenarios.
//! - [`io`] and [`cli`]: file schemas, manifests and the command-line front end.

pub mod cli;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod matrices;
pub mod oracle;
pub mod scenario;
pub mod solver;
pub mod tracker;

mod eta;
mod root;

pub use geometry::{CorrelationMode, PolarObservation, Provenance, RawPositionEstimate, SensorSite};
pub use grid::{GridError, TimeGrid};
pub use matrices::FilterMatrices;
pub use solver::{
    NullSpaceRule, ScalarObservationSeries, ShadowingTrajectory, SolveError, SolveOptions, VectorObservationSeries,
};
pub use tracker::{MissingPolicy, Tracker, TrackerConfig};
