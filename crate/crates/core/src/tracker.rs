//! Sequential state estimation: keep a sliding window of accepted
//! observations, re-solve the window at every step and report the newest
//! point of the trajectory.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CorrelationMode, Provenance, RawPositionEstimate, DEFAULT_DROP_THRESHOLD};
use crate::grid::TimeGrid;
use crate::solver::{
    solve_per_component, solve_vector_with, ShadowingTrajectory, SolveError, SolveOptions, VectorObservationSeries,
};

pub const DEFAULT_GAMMA: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("timestamp {t} does not follow the previous timestamp {last}")]
    OutOfOrderTimestamp { t: f64, last: f64 },
    #[error("window holds only {usable} usable observations, need 3")]
    WindowTooSparse { usable: usize },
    #[error("no trajectory has been solved yet")]
    NoTrajectoryYet,
    #[error("observation has dimension {got}, tracker has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid tracker configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// What to do with a time step that has no usable observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingPolicy {
    /// Leave the slot out; the next gap simply grows.
    CoalesceGaps,
    /// Keep the slot in the grid with zero information.
    ZeroWeightPlaceholder,
    /// Fill the slot with the constant-velocity forecast of the current
    /// trajectory at reduced information.
    ForecastInsert,
}

impl MissingPolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            MissingPolicy::CoalesceGaps => "coalesce-gaps",
            MissingPolicy::ZeroWeightPlaceholder => "zero-weight-placeholder",
            MissingPolicy::ForecastInsert => "forecast-insert",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    /// Maximum number of window slots.
    pub window: usize,
    pub eta: f64,
    pub policy: MissingPolicy,
    /// Scale applied to the mean window information for forecast slots.
    pub gamma: f64,
    pub drop_threshold: f64,
    /// `IgnoreCorrelation` solves each component with the diagonal information;
    /// `Propagate` runs the block solve with full information matrices.
    pub correlation: CorrelationMode,
    pub solve: SolveOptions,
}

impl TrackerConfig {
    pub fn new(window: usize, eta: f64) -> Self {
        Self {
            window,
            eta,
            policy: MissingPolicy::CoalesceGaps,
            gamma: DEFAULT_GAMMA,
            drop_threshold: DEFAULT_DROP_THRESHOLD,
            correlation: CorrelationMode::IgnoreCorrelation,
            solve: SolveOptions::default(),
        }
    }

    pub fn with_policy(mut self, policy: MissingPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn validate(&self) -> Result<(), TrackError> {
        if self.window < 3 {
            return Err(TrackError::InvalidConfig(format!("window {} < 3", self.window)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(TrackError::InvalidConfig(format!("eta {} must be positive", self.eta)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(TrackError::InvalidConfig(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        Ok(())
    }
}

/// One slot of the sliding window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowEntry {
    pub t: f64,
    pub position: Vec<f64>,
    pub information: DMatrix<f64>,
    pub weight: f64,
    pub provenance: Provenance,
}

impl WindowEntry {
    fn carries_information(&self) -> bool {
        self.information.iter().any(|&v| v != 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrackInput {
    Observation(WindowEntry),
    Gap { t: f64 },
}

impl TrackInput {
    pub fn scalar(t: f64, value: f64, information: f64) -> Self {
        TrackInput::Observation(WindowEntry {
            t,
            position: vec![value],
            information: DMatrix::from_element(1, 1, information),
            weight: 1.0,
            provenance: Provenance::Observed,
        })
    }

    pub fn vector(t: f64, position: Vec<f64>, information: DMatrix<f64>) -> Self {
        TrackInput::Observation(WindowEntry { t, position, information, weight: 1.0, provenance: Provenance::Observed })
    }

    pub fn from_raw(t: f64, raw: &RawPositionEstimate) -> Self {
        TrackInput::Observation(WindowEntry {
            t,
            position: raw.position.to_vec(),
            information: DMatrix::from_fn(2, 2, |i, j| raw.information[(i, j)]),
            weight: raw.weight,
            provenance: raw.provenance,
        })
    }

    pub fn gap(t: f64) -> Self {
        TrackInput::Gap { t }
    }

    pub fn t(&self) -> f64 {
        match self {
            TrackInput::Observation(e) => e.t,
            TrackInput::Gap { t } => *t,
        }
    }
}

/// Point estimate emitted by one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEstimate {
    pub t: f64,
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    /// Condition weight of the incoming observation (0 for gaps).
    pub weight: f64,
    /// What happened to the incoming slot.
    pub provenance: Provenance,
    /// The estimate is a constant-velocity continuation past the window.
    pub extrapolated: bool,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    dim: Option<usize>,
    window: VecDeque<WindowEntry>,
    trajectory: Option<ShadowingTrajectory>,
    last_t: Option<f64>,
    latest: Option<StepEstimate>,
    last_provenance: Option<Provenance>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self, TrackError> {
        config.validate()?;
        Ok(Self {
            config,
            dim: None,
            window: VecDeque::new(),
            trajectory: None,
            last_t: None,
            latest: None,
            last_provenance: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn window(&self) -> impl Iterator<Item = &WindowEntry> {
        self.window.iter()
    }

    pub fn trajectory(&self) -> Option<&ShadowingTrajectory> {
        self.trajectory.as_ref()
    }

    pub fn latest(&self) -> Option<&StepEstimate> {
        self.latest.as_ref()
    }

    /// What happened to the slot of the most recent accepted step, also when
    /// that step returned `WindowTooSparse`.
    pub fn last_provenance(&self) -> Option<Provenance> {
        self.last_provenance
    }

    fn usable(&self) -> usize {
        self.window.iter().filter(|e| e.carries_information()).count()
    }

    /// Forecast slot at `t_next`: the constant-velocity continuation of the
    /// current trajectory with `gamma` times the mean observed information.
    pub fn insert_forecast(&self, t_next: f64) -> Result<WindowEntry, TrackError> {
        let traj = self.trajectory.as_ref().ok_or(TrackError::NoTrajectoryYet)?;
        let point = traj.evaluate(t_next)?;
        let dim = traj.dim();
        let observed: Vec<&WindowEntry> =
            self.window.iter().filter(|e| e.provenance == Provenance::Observed && e.carries_information()).collect();
        let pool: Vec<&WindowEntry> = if observed.is_empty() {
            self.window.iter().filter(|e| e.carries_information()).collect()
        } else {
            observed
        };
        let mut mean = DMatrix::zeros(dim, dim);
        for e in &pool {
            mean += &e.information;
        }
        mean /= pool.len().max(1) as f64;
        Ok(WindowEntry {
            t: t_next,
            position: point.position,
            information: mean * self.config.gamma,
            weight: 0.0,
            provenance: Provenance::ForecastInserted,
        })
    }

    /// Applies the missing-data policy for a step at `t` without a usable
    /// observation. Returns the provenance recorded for the step.
    pub fn apply_missing_policy(&mut self, t: f64, weight: f64) -> Provenance {
        match self.config.policy {
            MissingPolicy::CoalesceGaps => Provenance::Dropped,
            MissingPolicy::ZeroWeightPlaceholder => {
                let dim = self.dim.unwrap_or(1);
                let position = match &self.trajectory {
                    Some(traj) => traj.evaluate(t).map(|p| p.position).unwrap_or_else(|_| vec![0.0; dim]),
                    None => vec![0.0; dim],
                };
                self.window.push_back(WindowEntry {
                    t,
                    position,
                    information: DMatrix::zeros(dim, dim),
                    weight,
                    provenance: Provenance::Dropped,
                });
                Provenance::Dropped
            }
            MissingPolicy::ForecastInsert => match self.insert_forecast(t) {
                Ok(mut entry) => {
                    entry.weight = weight;
                    self.window.push_back(entry);
                    Provenance::ForecastInserted
                }
                Err(_) => Provenance::Dropped,
            },
        }
    }

    pub fn step(&mut self, input: TrackInput) -> Result<StepEstimate, TrackError> {
        let t = input.t();
        if !t.is_finite() {
            return Err(SolveError::NonFinite(format!("timestamp {t}")).into());
        }
        if let Some(last) = self.last_t {
            if t <= last {
                return Err(TrackError::OutOfOrderTimestamp { t, last });
            }
        }
        let (weight, accepted) = match input {
            TrackInput::Observation(entry) => {
                let dim = entry.position.len();
                match self.dim {
                    Some(expected) if expected != dim => {
                        return Err(TrackError::DimensionMismatch { expected, got: dim })
                    }
                    _ => {}
                }
                if entry.information.shape() != (dim, dim) {
                    return Err(TrackError::DimensionMismatch { expected: dim, got: entry.information.nrows() });
                }
                self.dim = Some(dim);
                let usable = entry.provenance != Provenance::Dropped
                    && entry.weight >= self.config.drop_threshold
                    && entry.carries_information()
                    && entry.position.iter().all(|v| v.is_finite());
                (entry.weight, if usable { Some(entry) } else { None })
            }
            TrackInput::Gap { .. } => (0.0, None),
        };
        self.last_t = Some(t);

        let changed;
        let provenance = match accepted {
            Some(entry) => {
                self.window.push_back(entry);
                changed = true;
                Provenance::Observed
            }
            None => {
                let before = self.window.len();
                let p = self.apply_missing_policy(t, weight);
                changed = self.window.len() != before;
                p
            }
        };
        self.last_provenance = Some(provenance);
        while self.window.len() > self.config.window {
            self.window.pop_front();
        }

        if changed || self.trajectory.is_none() {
            let usable = self.usable();
            if usable < 3 {
                return Err(TrackError::WindowTooSparse { usable });
            }
            self.trajectory = Some(self.solve_window()?);
        }
        let traj = self.trajectory.as_ref().expect("solved above");
        let point = traj.evaluate(t)?;
        let estimate = StepEstimate {
            t,
            position: point.position,
            velocity: point.velocity,
            weight,
            provenance,
            extrapolated: point.extrapolated,
        };
        self.latest = Some(estimate.clone());
        Ok(estimate)
    }

    fn solve_window(&self) -> Result<ShadowingTrajectory, TrackError> {
        let dim = self.dim.unwrap_or(1);
        let grid = TimeGrid::new(self.window.iter().map(|e| e.t).collect()).map_err(SolveError::from)?;
        let values = DMatrix::from_fn(self.window.len(), dim, |i, k| self.window[i].position[k]);
        let info = self.window.iter().map(|e| e.information.clone()).collect();
        let series = VectorObservationSeries::new(grid, values, info)?;
        let traj = match self.config.correlation {
            CorrelationMode::IgnoreCorrelation => solve_per_component(&series, self.config.eta, &self.config.solve)?,
            CorrelationMode::Propagate => solve_vector_with(&series, self.config.eta, &self.config.solve)?,
        };
        Ok(traj)
    }
}
