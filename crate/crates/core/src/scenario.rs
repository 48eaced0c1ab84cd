//! Seeded synthetic scenarios.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`; Gaussian draws
//! use `rand_distr::StandardNormal`. Streams are stable for a given build of
//! this crate and its pinned dependencies. Every scenario samples at unit time
//! steps.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::geometry::{normalize_bearing, PolarObservation, SensorSite};
use crate::grid::TimeGrid;
use crate::solver::{ScalarObservationSeries, SolveError, VectorObservationSeries};

pub const GENERATOR: &str = "chacha8/seed_from_u64+standard-normal";

pub const SCENARIO_IDS: &[&str] =
    &["rednoise", "rednoise-missing", "planar", "range-bearing-a", "range-bearing-b", "sonar"];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("invalid scenario parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub id: String,
    pub seed: u64,
    pub generator: String,
    pub t_start: f64,
    pub t_end: f64,
    pub step: f64,
    pub parameters: serde_json::Value,
}

impl ScenarioMeta {
    fn new(id: &str, seed: u64, t_end: f64, parameters: serde_json::Value) -> Self {
        Self { id: id.into(), seed, generator: GENERATOR.into(), t_start: 0.0, t_end, step: 1.0, parameters }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn unit_times(t_end: usize) -> Vec<f64> {
    (0..=t_end).map(|t| t as f64).collect()
}

/// Which noise sources are switched on for the red-noise scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RedNoise {
    pub drift: bool,
    pub observation: bool,
}

impl Default for RedNoise {
    fn default() -> Self {
        Self { drift: true, observation: true }
    }
}

#[derive(Debug, Clone)]
pub struct ScalarScenario {
    pub meta: ScenarioMeta,
    pub truth: Vec<f64>,
    pub observations: ScalarObservationSeries,
}

pub const REDNOISE_SD: f64 = 3.0;

/// `25 + 10 sin(t/15) + chi_t` observed with N(0, 9) noise for `t = 0..=100`;
/// `chi` is a cumulative sum of unit Gaussians with `chi_0 = 0`.
pub fn gen_scalar_rednoise(seed: u64) -> ScalarScenario {
    gen_scalar_rednoise_with(seed, RedNoise::default())
}

pub fn gen_scalar_rednoise_with(seed: u64, noise: RedNoise) -> ScalarScenario {
    let mut rng = rng(seed);
    let times = unit_times(100);
    let mut chi = 0.0;
    let mut truth = Vec::with_capacity(times.len());
    let mut values = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        // one drift draw per step after the first, then one observation draw
        if i > 0 {
            let z = normal(&mut rng);
            if noise.drift {
                chi += z;
            }
        }
        let x = 25.0 + 10.0 * (t / 15.0).sin() + chi;
        let e = normal(&mut rng);
        truth.push(x);
        values.push(if noise.observation { x + REDNOISE_SD * e } else { x });
    }
    let weights = vec![1.0 / (REDNOISE_SD * REDNOISE_SD); times.len()];
    let grid = TimeGrid::new(times).expect("unit grid");
    let observations = ScalarObservationSeries::new(grid, values, weights).expect("valid series");
    let meta = ScenarioMeta::new(
        "rednoise",
        seed,
        100.0,
        json!({"observation_sd": REDNOISE_SD, "drift": noise.drift, "observation_noise": noise.observation}),
    );
    ScalarScenario { meta, truth, observations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MissingMode {
    Remove,
    ZeroWeight,
}

/// Retention mask for `len` samples with `fraction` of them missing.
/// `floor(fraction * len)` interior samples are removed, chosen uniformly;
/// both endpoints are always kept.
pub fn missing_mask(len: usize, fraction: f64, seed: u64) -> Result<Vec<bool>, ScenarioError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(ScenarioError::InvalidParameter(format!("missing fraction {fraction}")));
    }
    let mut keep = vec![true; len];
    if len <= 2 {
        return Ok(keep);
    }
    let interior = len - 2;
    let remove = ((fraction * len as f64).floor() as usize).min(interior);
    let mut rng = rng(seed);
    for i in index::sample(&mut rng, interior, remove) {
        keep[i + 1] = false;
    }
    Ok(keep)
}

pub fn apply_missing(
    series: &ScalarObservationSeries,
    fraction: f64,
    seed: u64,
    mode: MissingMode,
) -> Result<ScalarObservationSeries, ScenarioError> {
    let keep = missing_mask(series.values().len(), fraction, seed)?;
    let times = series.grid().times();
    let out = match mode {
        MissingMode::Remove => {
            let pick = |xs: &[f64]| xs.iter().zip(&keep).filter(|(_, k)| **k).map(|(x, _)| *x).collect::<Vec<_>>();
            ScalarObservationSeries::new(
                TimeGrid::new(pick(times)).map_err(SolveError::from)?,
                pick(series.values()),
                pick(series.weights()),
            )?
        }
        MissingMode::ZeroWeight => {
            let weights = series.weights().iter().zip(&keep).map(|(w, k)| if *k { *w } else { 0.0 }).collect();
            ScalarObservationSeries::new(series.grid().clone(), series.values().to_vec(), weights)?
        }
    };
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PlanarScenario {
    pub meta: ScenarioMeta,
    pub truth: Vec<[f64; 2]>,
    pub observations: VectorObservationSeries,
}

pub const PLANAR_SD: f64 = 5.0;

/// The planar test path: the scalar drift term is added to both components.
pub fn planar_truth(t: f64) -> [f64; 2] {
    let drift = 10.0 * (t - 10.0) / 150.0;
    let amp = (1.0 - t) / 3.0;
    [drift + amp * (t / 15.0).sin(), drift + amp * (2.0 - t / 15.0)]
}

pub fn planar_times() -> Vec<f64> {
    unit_times(150)
}

/// Planar path for `t = 0..=150` with independent N(0, sd^2) noise per
/// component; `sd = 0` gives the path itself with unit information.
pub fn gen_planar_path(seed: u64, sd: f64) -> Result<PlanarScenario, ScenarioError> {
    if !(sd >= 0.0 && sd.is_finite()) {
        return Err(ScenarioError::InvalidParameter(format!("noise sd {sd}")));
    }
    let mut rng = rng(seed);
    let times = planar_times();
    let truth: Vec<[f64; 2]> = times.iter().map(|&t| planar_truth(t)).collect();
    let mut values = DMatrix::zeros(times.len(), 2);
    for (i, p) in truth.iter().enumerate() {
        for k in 0..2 {
            values[(i, k)] = p[k] + sd * normal(&mut rng);
        }
    }
    let info_scale = if sd > 0.0 { 1.0 / (sd * sd) } else { 1.0 };
    let info = vec![DMatrix::identity(2, 2) * info_scale; times.len()];
    let observations = VectorObservationSeries::new(TimeGrid::new(times).expect("unit grid"), values, info)?;
    let meta = ScenarioMeta::new("planar", seed, 150.0, json!({"noise_sd": sd}));
    Ok(PlanarScenario { meta, truth, observations })
}

/// Which of range and bearing is the accurate measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccurateChannel {
    Bearing,
    Range,
}

#[derive(Debug, Clone)]
pub struct RangeBearingScenario {
    pub meta: ScenarioMeta,
    pub site: [f64; 2],
    pub times: Vec<f64>,
    pub truth: Vec<[f64; 2]>,
    pub readings: Vec<PolarObservation>,
}

pub const RANGE_BEARING_SITE: [f64; 2] = [50.0, 0.0];
/// Bearing sd (radians) of the coarse channel.
pub const RANGE_BEARING_COARSE_SD: f64 = 0.1;
pub const ACCURACY_RATIO: f64 = 10.0;

/// The planar path seen from one fixed site. The coarse channel has bearing
/// sd 0.1 rad, or the range sd of the same size at the mean range; the
/// accurate channel is ten times better.
pub fn gen_range_bearing(seed: u64, accurate: AccurateChannel) -> RangeBearingScenario {
    gen_range_bearing_with(seed, accurate, RANGE_BEARING_SITE, RANGE_BEARING_COARSE_SD)
}

pub fn gen_range_bearing_with(
    seed: u64,
    accurate: AccurateChannel,
    site: [f64; 2],
    coarse_sd: f64,
) -> RangeBearingScenario {
    let mut rng = rng(seed);
    let times = planar_times();
    let truth: Vec<[f64; 2]> = times.iter().map(|&t| planar_truth(t)).collect();
    let ranges: Vec<f64> = truth.iter().map(|p| (p[0] - site[0]).hypot(p[1] - site[1])).collect();
    let mean_range = ranges.iter().sum::<f64>() / ranges.len() as f64;
    let (range_sd, bearing_sd) = match accurate {
        AccurateChannel::Range => (coarse_sd * mean_range / ACCURACY_RATIO, coarse_sd),
        AccurateChannel::Bearing => (coarse_sd * mean_range, coarse_sd / ACCURACY_RATIO),
    };
    let readings = truth
        .iter()
        .zip(&ranges)
        .map(|(p, &r)| {
            let bearing = (p[1] - site[1]).atan2(p[0] - site[0]);
            let range = (r + range_sd * normal(&mut rng)).abs().max(1e-6);
            PolarObservation {
                range,
                bearing: normalize_bearing(bearing + bearing_sd * normal(&mut rng)),
                range_variance: range_sd * range_sd,
                bearing_variance: bearing_sd * bearing_sd,
            }
        })
        .collect();
    let id = match accurate {
        AccurateChannel::Bearing => "range-bearing-a",
        AccurateChannel::Range => "range-bearing-b",
    };
    let meta = ScenarioMeta::new(
        id,
        seed,
        150.0,
        json!({"site": site, "accurate": accurate, "range_sd": range_sd, "bearing_sd": bearing_sd, "mean_range": mean_range}),
    );
    RangeBearingScenario { meta, site, times, truth, readings }
}

#[derive(Debug, Clone)]
pub struct SonarScenario {
    pub meta: ScenarioMeta,
    pub times: Vec<f64>,
    pub truth: Vec<[f64; 2]>,
    pub sensor_a: SensorSite,
    pub sensor_b: SensorSite,
    /// Noisy bearings `(from a, from b)` per time.
    pub bearings: Vec<[f64; 2]>,
    pub bearing_sd: f64,
}

pub const SONAR_BEARING_SD: f64 = 0.02;

pub fn sonar_truth(t: f64) -> [f64; 2] {
    [(t / 25.0).sin(), (t / 25.0).cos()]
}

pub fn sonar_sensors() -> (SensorSite, SensorSite) {
    (SensorSite::moving([-3.0, 3.0], [3.0, 1.0], 0.0, 100.0), SensorSite::moving([-3.0, -2.0], [3.0, -1.0], 0.0, 100.0))
}

/// Target on the unit circle, clockwise from 12 o'clock, watched by two
/// sensors moving at constant speed, `t = 0..=100`.
pub fn gen_two_sensor_bearings(seed: u64, bearing_sd: f64) -> Result<SonarScenario, ScenarioError> {
    if !(bearing_sd >= 0.0 && bearing_sd.is_finite()) {
        return Err(ScenarioError::InvalidParameter(format!("bearing sd {bearing_sd}")));
    }
    let mut rng = rng(seed);
    let times = unit_times(100);
    let (sensor_a, sensor_b) = sonar_sensors();
    let truth: Vec<[f64; 2]> = times.iter().map(|&t| sonar_truth(t)).collect();
    let bearings = times
        .iter()
        .zip(&truth)
        .map(|(&t, p)| {
            let mut pair = [0.0; 2];
            for (k, site) in [sensor_a, sensor_b].iter().enumerate() {
                let s = site.position_at(t);
                pair[k] = normalize_bearing((p[1] - s[1]).atan2(p[0] - s[0]) + bearing_sd * normal(&mut rng));
            }
            pair
        })
        .collect();
    let meta = ScenarioMeta::new("sonar", seed, 100.0, json!({"bearing_sd": bearing_sd}));
    Ok(SonarScenario { meta, times, truth, sensor_a, sensor_b, bearings, bearing_sd })
}
