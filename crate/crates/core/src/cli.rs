//! `shadow-track {generate|filter|track|transform}`.
//!
//! Exit codes: 0 success, 2 usage, 3 data error, 4 numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde_json::json;
use thiserror::Error;

use crate::eta::{search_eta_with, EtaSearchError, EtaSearchOptions};
use crate::geometry::{
    decorrelate_information, range_bearing_to_position, two_bearings_to_position, two_ranges_to_position,
    CorrelationMode, PolarObservation, Provenance, DEFAULT_DROP_THRESHOLD,
};
use crate::grid::TimeGrid;
use crate::io::{
    fmt_f64, manifest_path_for, read_json, read_observations, read_observations_with, render_csv, to_json_bytes,
    write_file, FileDigest, GeometryConfig, GeometryFile, IoError, ObservationFile, RunManifest, Table,
    RAW_ESTIMATE_HEADER,
};
use crate::scenario::{
    apply_missing, gen_planar_path, gen_range_bearing, gen_scalar_rednoise, gen_two_sensor_bearings, AccurateChannel,
    MissingMode, ScenarioError, ScenarioMeta, PLANAR_SD, SCENARIO_IDS, SONAR_BEARING_SD,
};
use crate::solver::{
    solve_per_component, solve_scalar, solve_vector, ScalarObservationSeries, ShadowingTrajectory, SolveError,
    VectorObservationSeries,
};
use crate::tracker::{MissingPolicy, TrackError, TrackInput, Tracker, TrackerConfig, WindowEntry, DEFAULT_GAMMA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub const DEFAULT_ETA_BRACKET: (f64, f64) = (1e-4, 1e8);

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::UnknownScenario(_) | ScenarioError::InvalidParameter(_) => CliError::Usage(e.to_string()),
            ScenarioError::Solve(e) => CliError::Data(e.to_string()),
        }
    }
}

fn solve_err(e: SolveError) -> CliError {
    match e {
        SolveError::NonPositiveEta(_) => CliError::Usage(e.to_string()),
        _ => CliError::Data(e.to_string()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "shadow-track", version, about = "Shadowing-filter trajectory smoothing and tracking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic scenario (truth, observations, metadata).
    Generate(GenerateArgs),
    /// Smooth a whole observation file into one trajectory.
    Filter(FilterArgs),
    /// Sequential estimation over a sliding window, one row per input row.
    Track(TrackArgs),
    /// Turn sensor readings into raw Cartesian position estimates.
    Transform(TransformArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Scenario id: rednoise, rednoise-missing, planar, range-bearing-a, range-bearing-b, sonar.
    pub scenario: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fraction of observations removed (rednoise-missing only).
    #[arg(long, default_value_t = 0.75)]
    pub missing: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    /// Observation CSV (`t,p[,info]` or `t,x,y,ixx,ixy,iyy[,w,provenance]`).
    pub input: PathBuf,
    #[arg(long, required_unless_present = "xi", conflicts_with = "xi")]
    pub eta: Option<f64>,
    /// Target RMS acceleration; eta is searched for inside --bracket.
    #[arg(long)]
    pub xi: Option<f64>,
    /// Eta search bracket `lo,hi`.
    #[arg(long, value_parser = parse_bracket, requires = "xi")]
    pub bracket: Option<(f64, f64)>,
    /// Block solve with the full information matrices.
    #[arg(long)]
    pub vector: bool,
    /// Replace each information matrix by its decorrelated diagonal.
    #[arg(long)]
    pub ignore_correlation: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    CoalesceGaps,
    ZeroWeightPlaceholder,
    ForecastInsert,
}

impl From<PolicyArg> for MissingPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::CoalesceGaps => MissingPolicy::CoalesceGaps,
            PolicyArg::ZeroWeightPlaceholder => MissingPolicy::ZeroWeightPlaceholder,
            PolicyArg::ForecastInsert => MissingPolicy::ForecastInsert,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Observation stream, same schemas as `filter`; empty value cells are gaps.
    pub input: PathBuf,
    #[arg(long)]
    pub eta: f64,
    /// Window length in slots (default: the whole stream).
    #[arg(long)]
    pub window: Option<usize>,
    /// Missing-data policy (default: coalesce-gaps for scalar, forecast-insert for planar).
    #[arg(long, value_enum)]
    pub policy: Option<PolicyArg>,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    pub gamma: f64,
    #[arg(long)]
    pub ignore_correlation: bool,
    #[arg(long)]
    pub vector: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    /// Sensor readings CSV (`t` plus the two reading columns of the geometry kind).
    pub input: PathBuf,
    /// Geometry JSON.
    #[arg(long)]
    pub geometry: PathBuf,
    /// Diagonal information from the per-axis variances instead of the full propagation.
    #[arg(long)]
    pub ignore_correlation: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_bracket(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    Ok((lo, hi))
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("shadow-track: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Filter(a) => cmd_filter(&a),
        Command::Track(a) => cmd_track(&a),
        Command::Transform(a) => cmd_transform(&a),
    }
}

/// Files of one run, written together once the manifest hash is known.
struct Outputs {
    files: Vec<(PathBuf, Output)>,
}

enum Output {
    Csv { header: Vec<&'static str>, rows: Vec<Vec<String>> },
    Json(serde_json::Value),
}

impl Outputs {
    fn new() -> Self {
        Self { files: Vec::new() }
    }

    fn csv(&mut self, path: PathBuf, header: &[&'static str], rows: Vec<Vec<String>>) {
        self.files.push((path, Output::Csv { header: header.to_vec(), rows }));
    }

    fn json(&mut self, path: PathBuf, value: serde_json::Value) {
        self.files.push((path, Output::Json(value)));
    }

    /// Seals the manifest over the output list, then writes every file and
    /// the manifest itself.
    fn write(self, mut manifest: RunManifest, manifest_path: &Path) -> Result<(), CliError> {
        manifest.outputs = self.files.iter().map(|(p, _)| p.display().to_string()).collect();
        let hash = manifest.seal();
        for (path, out) in &self.files {
            let bytes = match out {
                Output::Csv { header, rows } => render_csv(&hash, header, rows),
                Output::Json(v) => {
                    let mut v = v.clone();
                    if let Some(obj) = v.as_object_mut() {
                        obj.insert("manifest".into(), json!(hash));
                    }
                    to_json_bytes(&v)
                }
            };
            write_file(path, &bytes)?;
        }
        write_file(manifest_path, &to_json_bytes(&manifest))?;
        Ok(())
    }
}

fn f(v: f64) -> String {
    fmt_f64(v)
}

fn scalar_obs_rows(obs: &ScalarObservationSeries) -> Vec<Vec<String>> {
    obs.grid()
        .times()
        .iter()
        .zip(obs.values())
        .zip(obs.weights())
        .map(|((t, p), w)| vec![f(*t), f(*p), f(*w)])
        .collect()
}

fn generate_scalar_files(
    out: &mut Outputs,
    dir: &Path,
    truth_times: &[f64],
    truth: &[f64],
    obs: &ScalarObservationSeries,
) {
    let truth_rows = truth_times.iter().zip(truth).map(|(t, p)| vec![f(*t), f(*p)]).collect();
    out.csv(dir.join("truth.csv"), &["t", "p"], truth_rows);
    out.csv(dir.join("observations.csv"), &["t", "p", "info"], scalar_obs_rows(obs));
}

fn planar_truth_rows(times: &[f64], truth: &[[f64; 2]]) -> Vec<Vec<String>> {
    times.iter().zip(truth).map(|(t, p)| vec![f(*t), f(p[0]), f(p[1])]).collect()
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<(), CliError> {
    let dir = &a.out;
    let mut out = Outputs::new();
    let meta: ScenarioMeta = match a.scenario.as_str() {
        "rednoise" | "rednoise-missing" => {
            let s = gen_scalar_rednoise(a.seed);
            let times = s.observations.grid().times().to_vec();
            let mut meta = s.meta.clone();
            let obs = if a.scenario == "rednoise-missing" {
                meta.id = a.scenario.clone();
                meta.parameters["missing_fraction"] = json!(a.missing);
                apply_missing(&s.observations, a.missing, a.seed, MissingMode::Remove)?
            } else {
                s.observations.clone()
            };
            generate_scalar_files(&mut out, dir, &times, &s.truth, &obs);
            meta
        }
        "planar" => {
            let s = gen_planar_path(a.seed, PLANAR_SD)?;
            let times = s.observations.grid().times();
            out.csv(dir.join("truth.csv"), &["t", "x", "y"], planar_truth_rows(times, &s.truth));
            let rows = (0..times.len())
                .map(|i| {
                    let v = s.observations.values();
                    let info = &s.observations.information()[i];
                    vec![f(times[i]), f(v[(i, 0)]), f(v[(i, 1)]), f(info[(0, 0)]), f(info[(0, 1)]), f(info[(1, 1)])]
                })
                .collect();
            out.csv(dir.join("observations.csv"), crate::io::PLANAR_HEADER, rows);
            s.meta
        }
        "range-bearing-a" | "range-bearing-b" => {
            let accurate =
                if a.scenario == "range-bearing-a" { AccurateChannel::Bearing } else { AccurateChannel::Range };
            let s = gen_range_bearing(a.seed, accurate);
            out.csv(dir.join("truth.csv"), &["t", "x", "y"], planar_truth_rows(&s.times, &s.truth));
            let rows = s.times.iter().zip(&s.readings).map(|(t, r)| vec![f(*t), f(r.range), f(r.bearing)]).collect();
            out.csv(dir.join("readings.csv"), &["t", "range", "bearing"], rows);
            let r0 = &s.readings[0];
            let geometry = GeometryFile {
                config: GeometryConfig::RangeBearing {
                    site: crate::geometry::SensorSite::fixed(s.site[0], s.site[1]),
                    range_variance: r0.range_variance,
                    bearing_variance: r0.bearing_variance,
                },
                drop_threshold: None,
            };
            out.json(dir.join("geometry.json"), serde_json::to_value(&geometry).expect("serializable"));
            s.meta
        }
        "sonar" => {
            let s = gen_two_sensor_bearings(a.seed, SONAR_BEARING_SD)?;
            out.csv(dir.join("truth.csv"), &["t", "x", "y"], planar_truth_rows(&s.times, &s.truth));
            let rows = s
                .times
                .iter()
                .map(|&t| {
                    let (pa, pb) = (s.sensor_a.position_at(t), s.sensor_b.position_at(t));
                    vec![f(t), f(pa[0]), f(pa[1]), f(pb[0]), f(pb[1])]
                })
                .collect();
            out.csv(dir.join("sensors.csv"), &["t", "ax", "ay", "bx", "by"], rows);
            let rows = s.times.iter().zip(&s.bearings).map(|(t, b)| vec![f(*t), f(b[0]), f(b[1])]).collect();
            out.csv(dir.join("readings.csv"), &["t", "bearing_a", "bearing_b"], rows);
            let v = s.bearing_sd * s.bearing_sd;
            let geometry = GeometryFile {
                config: GeometryConfig::TwoBearings { sites: [s.sensor_a, s.sensor_b], bearing_variance: [v, v] },
                drop_threshold: None,
            };
            out.json(dir.join("geometry.json"), serde_json::to_value(&geometry).expect("serializable"));
            s.meta
        }
        other => {
            return Err(CliError::Usage(format!(
                "{} (known: {})",
                ScenarioError::UnknownScenario(other.into()),
                SCENARIO_IDS.join(", ")
            )))
        }
    };
    out.json(dir.join("scenario.json"), serde_json::to_value(&meta).expect("serializable"));
    let mut manifest = RunManifest::new("generate");
    manifest.scenario = Some(a.scenario.clone());
    manifest.seed = Some(a.seed);
    out.write(manifest, &dir.join("manifest.json"))
}

/// Observation file as solver input. Gap rows become zero-information slots.
enum Series {
    Scalar(ScalarObservationSeries),
    Vector(VectorObservationSeries),
}

fn usable_information(row: &crate::io::ObservationRow, decorrelate: bool) -> DMatrix<f64> {
    let usable = row.position.is_some() && row.provenance != Provenance::Dropped;
    if !usable {
        return DMatrix::zeros(row.information.nrows(), row.information.ncols());
    }
    if decorrelate {
        decorrelate_information(&row.information)
    } else {
        row.information.clone()
    }
}

fn build_series(file: &ObservationFile, decorrelate: bool) -> Result<Series, CliError> {
    let times: Vec<f64> = file.rows.iter().map(|r| r.t).collect();
    let grid = TimeGrid::new(times).map_err(|e| CliError::Data(e.to_string()))?;
    let infos: Vec<DMatrix<f64>> = file.rows.iter().map(|r| usable_information(r, decorrelate)).collect();
    let value = |r: &crate::io::ObservationRow, k: usize| r.position.as_ref().map(|p| p[k]).unwrap_or(0.0);
    if file.dim == 1 {
        let values = file.rows.iter().map(|r| value(r, 0)).collect();
        let weights = infos.iter().map(|m| m[(0, 0)]).collect();
        Ok(Series::Scalar(ScalarObservationSeries::new(grid, values, weights).map_err(solve_err)?))
    } else {
        let values = DMatrix::from_fn(file.rows.len(), file.dim, |i, k| value(&file.rows[i], k));
        Ok(Series::Vector(VectorObservationSeries::new(grid, values, infos).map_err(solve_err)?))
    }
}

fn has_correlation(obs: &VectorObservationSeries) -> bool {
    obs.information().iter().any(|m| (0..m.nrows()).any(|i| (0..m.ncols()).any(|j| i != j && m[(i, j)] != 0.0)))
}

fn solve_series(series: &Series, eta: f64, block: bool) -> Result<ShadowingTrajectory, SolveError> {
    match series {
        Series::Scalar(obs) => solve_scalar(obs, eta),
        Series::Vector(obs) if block || has_correlation(obs) => solve_vector(obs, eta),
        Series::Vector(obs) => solve_per_component(obs, eta, &Default::default()),
    }
}

fn trajectory_rows(traj: &ShadowingTrajectory) -> Vec<Vec<String>> {
    let n = traj.len();
    let scale = traj.eta.sqrt();
    (0..n)
        .map(|i| {
            let ai = i.min(n - 2);
            let mut row = vec![f(traj.times()[i])];
            row.extend(traj.positions.row(i).iter().map(|v| f(*v)));
            row.extend(traj.velocities.row(i).iter().map(|v| f(*v)));
            row.extend(traj.accelerations.row(ai).iter().map(|v| f(*v)));
            row.extend(traj.accelerations.row(ai).iter().map(|v| f(v * scale)));
            row
        })
        .collect()
}

fn all_finite(traj: &ShadowingTrajectory) -> bool {
    traj.positions.iter().chain(traj.velocities.iter()).chain(traj.accelerations.iter()).all(|v| v.is_finite())
}

pub fn cmd_filter(a: &FilterArgs) -> Result<(), CliError> {
    let file = read_observations(&a.input)?;
    let series = build_series(&file, a.ignore_correlation)?;
    let mut manifest = RunManifest::new("filter");
    let eta = match (a.eta, a.xi) {
        (Some(eta), _) => eta,
        (None, Some(xi)) => {
            let bracket = a.bracket.unwrap_or(DEFAULT_ETA_BRACKET);
            let found = search_eta_with(
                |eta| Ok(solve_series(&series, eta, a.vector)?.rms_acceleration()),
                xi,
                bracket,
                &EtaSearchOptions::default(),
            )
            .map_err(|e| match e {
                EtaSearchError::InvalidBracket(..) => CliError::Usage(e.to_string()),
                EtaSearchError::Solve(e) => solve_err(e),
                _ => CliError::Numerical(e.to_string()),
            })?;
            manifest.xi_target = Some(xi);
            manifest.xi_achieved = Some(found.xi);
            manifest.eta_bracket = Some(bracket);
            found.eta
        }
        (None, None) => return Err(CliError::Usage("one of --eta or --xi is required".into())),
    };
    let traj = solve_series(&series, eta, a.vector).map_err(solve_err)?;
    if !all_finite(&traj) {
        return Err(CliError::Numerical("solution is not finite".into()));
    }
    let header: &[&'static str] = if file.dim == 1 {
        &["t", "p", "v", "a", "a_scaled"]
    } else {
        &["t", "x", "y", "vx", "vy", "ax", "ay", "ax_scaled", "ay_scaled"]
    };
    manifest.eta = Some(eta);
    manifest.vector = a.vector;
    manifest.correlation = Some(if a.ignore_correlation { "ignore" } else { "as-given" }.into());
    manifest.inputs = vec![FileDigest::of(&a.input)?];
    let mut out = Outputs::new();
    out.csv(a.out.clone(), header, trajectory_rows(&traj));
    out.write(manifest, &manifest_path_for(&a.out))
}

pub fn cmd_track(a: &TrackArgs) -> Result<(), CliError> {
    let file = read_observations_with(&a.input, false)?;
    let window = a.window.unwrap_or(file.rows.len().max(3));
    let policy: MissingPolicy = a.policy.map(Into::into).unwrap_or(if file.dim == 1 {
        MissingPolicy::CoalesceGaps
    } else {
        MissingPolicy::ForecastInsert
    });
    let correlated = file.rows.iter().any(|r| r.information.nrows() > 1 && r.information[(0, 1)] != 0.0);
    let mut config = TrackerConfig::new(window, a.eta).with_policy(policy);
    config.gamma = a.gamma;
    config.correlation = if a.vector || (correlated && !a.ignore_correlation) {
        CorrelationMode::Propagate
    } else {
        CorrelationMode::IgnoreCorrelation
    };
    let mut tracker = Tracker::new(config).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rows = Vec::with_capacity(file.rows.len());
    for row in &file.rows {
        let input = match &row.position {
            None => TrackInput::gap(row.t),
            Some(p) => TrackInput::Observation(WindowEntry {
                t: row.t,
                position: p.clone(),
                information: if a.ignore_correlation {
                    decorrelate_information(&row.information)
                } else {
                    row.information.clone()
                },
                weight: row.weight,
                provenance: row.provenance,
            }),
        };
        let weight = if row.position.is_some() { row.weight } else { 0.0 };
        let mut out = vec![f(row.t)];
        match tracker.step(input) {
            Ok(est) => {
                out.extend(est.position.iter().map(|v| f(*v)));
                out.push(f(weight));
                out.push(est.provenance.as_str().into());
            }
            Err(TrackError::WindowTooSparse { .. }) => {
                out.extend((0..file.dim).map(|_| String::new()));
                out.push(f(weight));
                out.push(tracker.last_provenance().unwrap_or(Provenance::Dropped).as_str().into());
            }
            Err(e @ TrackError::OutOfOrderTimestamp { .. }) | Err(e @ TrackError::DimensionMismatch { .. }) => {
                return Err(CliError::Data(format!("{}: line {}: {e}", a.input.display(), row.line)))
            }
            Err(e @ TrackError::InvalidConfig(_)) => return Err(CliError::Usage(e.to_string())),
            Err(e) => return Err(CliError::Numerical(format!("{}: line {}: {e}", a.input.display(), row.line))),
        }
        rows.push(out);
    }
    if rows.iter().flatten().any(|c| c == "NaN" || c == "inf") {
        return Err(CliError::Numerical("non-finite estimate".into()));
    }
    let header: &[&'static str] =
        if file.dim == 1 { &["t", "p", "w", "provenance"] } else { &["t", "x", "y", "w", "provenance"] };
    let mut manifest = RunManifest::new("track");
    manifest.eta = Some(a.eta);
    manifest.window = Some(window);
    manifest.policy = Some(policy.as_str().into());
    manifest.gamma = Some(a.gamma);
    manifest.correlation = Some(
        match config.correlation {
            CorrelationMode::Propagate => "propagate",
            CorrelationMode::IgnoreCorrelation => "ignore",
        }
        .into(),
    );
    manifest.vector = a.vector;
    manifest.inputs = vec![FileDigest::of(&a.input)?];
    let mut out = Outputs::new();
    out.csv(a.out.clone(), header, rows);
    out.write(manifest, &manifest_path_for(&a.out))
}

pub fn cmd_transform(a: &TransformArgs) -> Result<(), CliError> {
    let geometry: GeometryFile = read_json(&a.geometry)?;
    let table = Table::read(&a.input)?;
    let cols = geometry.config.reading_columns();
    table.require(&["t", cols[0], cols[1]]).map_err(|e| CliError::Data(format!("geometry/schema mismatch: {e}")))?;
    let times = table.times()?;
    let mode = if a.ignore_correlation { CorrelationMode::IgnoreCorrelation } else { CorrelationMode::Propagate };
    let threshold = geometry.drop_threshold.unwrap_or(DEFAULT_DROP_THRESHOLD);
    let mut rows = Vec::with_capacity(times.len());
    for (row, &t) in times.iter().enumerate() {
        let q = [table.f64(row, cols[0])?, table.f64(row, cols[1])?];
        let est = match &geometry.config {
            GeometryConfig::RangeBearing { site, range_variance, bearing_variance } => range_bearing_to_position(
                site.position_at(t),
                &PolarObservation {
                    range: q[0],
                    bearing: q[1],
                    range_variance: *range_variance,
                    bearing_variance: *bearing_variance,
                },
                mode,
            ),
            GeometryConfig::TwoBearings { sites, bearing_variance } => two_bearings_to_position(
                sites[0].position_at(t),
                sites[1].position_at(t),
                q[0],
                q[1],
                *bearing_variance,
                mode,
                threshold,
            ),
            GeometryConfig::TwoRanges { sites, range_variance, disambiguator } => two_ranges_to_position(
                sites[0].position_at(t),
                sites[1].position_at(t),
                q[0],
                q[1],
                *range_variance,
                *disambiguator,
                mode,
                threshold,
            ),
        }
        .map_err(|e| CliError::Data(format!("{}: line {}: {e}", a.input.display(), table.line(row))))?;
        let i = &est.information;
        rows.push(vec![
            f(t),
            f(est.position[0]),
            f(est.position[1]),
            f(i[(0, 0)]),
            f(i[(0, 1)]),
            f(i[(1, 1)]),
            f(est.weight),
            est.provenance.as_str().into(),
        ]);
    }
    let mut manifest = RunManifest::new("transform");
    manifest.correlation = Some(if a.ignore_correlation { "ignore" } else { "propagate" }.into());
    manifest.inputs = vec![FileDigest::of(&a.input)?, FileDigest::of(&a.geometry)?];
    let mut out = Outputs::new();
    out.csv(a.out.clone(), RAW_ESTIMATE_HEADER, rows);
    out.write(manifest, &manifest_path_for(&a.out))
}
