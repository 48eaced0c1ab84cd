use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("time grid needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("times must be strictly increasing (t[{index}] = {value} does not exceed its predecessor)")]
    NonIncreasingTimes { index: usize, value: f64 },
    #[error("time t[{0}] is not finite")]
    NonFinite(usize),
}

/// Observation times `t_0 < t_1 < ... < t_n` with at least one interior knot.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
    gaps: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self, GridError> {
        if let Some(i) = times.iter().position(|t| !t.is_finite()) {
            return Err(GridError::NonFinite(i));
        }
        if times.len() < 3 {
            return Err(GridError::TooFewPoints(times.len()));
        }
        let mut gaps = Vec::with_capacity(times.len() - 1);
        for (i, w) in times.windows(2).enumerate() {
            let gap = w[1] - w[0];
            if gap <= 0.0 {
                return Err(GridError::NonIncreasingTimes { index: i + 1, value: w[1] });
            }
            gaps.push(gap);
        }
        Ok(Self { times, gaps })
    }

    pub fn uniform(start: f64, step: f64, count: usize) -> Result<Self, GridError> {
        Self::new((0..count).map(|i| start + step * i as f64).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Interval lengths `tau_i = t_{i+1} - t_i`.
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// Number of intervals (one less than the number of points).
    pub fn intervals(&self) -> usize {
        self.gaps.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.end() - self.start()
    }

    /// The same grid traversed backwards, mapped onto `-t` so it stays increasing.
    pub fn reversed(&self) -> Self {
        let times = self.times.iter().rev().map(|t| -t).collect();
        let gaps = self.gaps.iter().rev().copied().collect();
        Self { times, gaps }
    }
}

pub fn build_time_grid(times: &[f64]) -> Result<TimeGrid, GridError> {
    TimeGrid::new(times.to_vec())
}
