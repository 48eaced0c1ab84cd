//! File formats.
//!
//! Time series are headered CSV. The first line of every file written here is
//! a comment `#shadow-track/1 manifest=<sha256>` tying it to the run manifest;
//! readers skip `#` lines. Information matrices are stored as the upper
//! triangle (`ixx, ixy, iyy`). Configs and manifests are JSON.
//!
//! | file | columns |
//! |------|---------|
//! | scalar observations | `t,p[,info]` |
//! | planar observations / raw estimates | `t,x,y,ixx,ixy,iyy[,w,provenance]` |
//! | range-bearing readings | `t,range,bearing` |
//! | two-bearing readings | `t,bearing_a,bearing_b` |
//! | two-range readings | `t,range_a,range_b` |

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{Provenance, SensorSite};

pub const SCHEMA: &str = "shadow-track/1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}{}: {message}", column.as_ref().map(|c| format!(", column '{c}'")).unwrap_or_default())]
    Schema { path: PathBuf, line: u64, column: Option<String>, message: String },
    #[error("{path}: {message}")]
    Json { path: PathBuf, message: String },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.to_path_buf(), source }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Formats a value for CSV output; non-finite values become empty fields.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// CSV body with the schema comment line in front.
pub fn render_csv(manifest_hash: &str, header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = format!("#{SCHEMA} manifest={manifest_hash}\n").into_bytes();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    out.extend(w.into_inner().expect("in-memory flush"));
    out
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| IoError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|e| IoError::io(path, e))
}

/// A parsed CSV table that remembers source line numbers for diagnostics.
#[derive(Debug, Clone)]
pub struct Table {
    pub path: PathBuf,
    pub headers: Vec<String>,
    pub rows: Vec<(u64, Vec<String>)>,
    /// Manifest hash from the schema comment, when present.
    pub manifest: Option<String>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, IoError> {
        let bytes = read_bytes(path)?;
        Self::parse(path, &bytes)
    }

    pub fn parse(path: &Path, bytes: &[u8]) -> Result<Self, IoError> {
        let text = std::str::from_utf8(bytes).map_err(|e| IoError::Schema {
            path: path.to_path_buf(),
            line: 0,
            column: None,
            message: format!("not UTF-8: {e}"),
        })?;
        let manifest = text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .and_then(|l| l.split_whitespace().find_map(|w| w.strip_prefix("manifest=")))
            .map(str::to_string);
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(bytes);
        let schema_err =
            |line: u64, message: String| IoError::Schema { path: path.to_path_buf(), line, column: None, message };
        let headers: Vec<String> =
            reader.headers().map_err(|e| schema_err(1, e.to_string()))?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                schema_err(line, e.to_string())
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            rows.push((line, record.iter().map(str::to_string).collect()));
        }
        Ok(Self { path: path.to_path_buf(), headers, rows, manifest })
    }

    pub fn has(&self, column: &str) -> bool {
        self.headers.iter().any(|h| h == column)
    }

    pub fn index(&self, column: &str) -> Result<usize, IoError> {
        self.headers.iter().position(|h| h == column).ok_or_else(|| IoError::Schema {
            path: self.path.clone(),
            line: 1,
            column: Some(column.into()),
            message: "missing column".into(),
        })
    }

    pub fn require(&self, columns: &[&str]) -> Result<(), IoError> {
        columns.iter().try_for_each(|c| self.index(c).map(|_| ()))
    }

    fn err(&self, row: usize, column: &str, message: String) -> IoError {
        IoError::Schema { path: self.path.clone(), line: self.rows[row].0, column: Some(column.into()), message }
    }

    pub fn line(&self, row: usize) -> u64 {
        self.rows[row].0
    }

    /// Optional numeric field: empty cells (and absent columns) are `None`.
    pub fn opt_f64(&self, row: usize, column: &str) -> Result<Option<f64>, IoError> {
        let Some(idx) = self.headers.iter().position(|h| h == column) else {
            return Ok(None);
        };
        let cell = self.rows[row].1.get(idx).map(String::as_str).unwrap_or("");
        if cell.is_empty() {
            return Ok(None);
        }
        let v: f64 = cell.parse().map_err(|_| self.err(row, column, format!("'{cell}' is not a number")))?;
        if !v.is_finite() {
            return Err(self.err(row, column, format!("'{cell}' is not finite")));
        }
        Ok(Some(v))
    }

    pub fn f64(&self, row: usize, column: &str) -> Result<f64, IoError> {
        self.index(column)?;
        self.opt_f64(row, column)?.ok_or_else(|| self.err(row, column, "empty value".into()))
    }

    pub fn opt_str(&self, row: usize, column: &str) -> Option<&str> {
        let idx = self.headers.iter().position(|h| h == column)?;
        self.rows[row].1.get(idx).map(String::as_str).filter(|s| !s.is_empty())
    }

    pub fn provenance(&self, row: usize) -> Result<Option<Provenance>, IoError> {
        match self.opt_str(row, "provenance") {
            None => Ok(None),
            Some(s) => Provenance::parse(s)
                .map(Some)
                .ok_or_else(|| self.err(row, "provenance", format!("unknown provenance '{s}'"))),
        }
    }

    /// Times of every row, checked to be strictly increasing.
    pub fn times(&self) -> Result<Vec<f64>, IoError> {
        let mut out: Vec<f64> = Vec::with_capacity(self.rows.len());
        for row in 0..self.rows.len() {
            let t = self.f64(row, "t")?;
            if let Some(&last) = out.last() {
                if t <= last {
                    return Err(self.err(row, "t", format!("time {t} does not follow {last}")));
                }
            }
            out.push(t);
        }
        Ok(out)
    }
}

/// One row of an observation file, scalar or planar.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRow {
    pub line: u64,
    pub t: f64,
    /// `None` marks a gap (empty value cells).
    pub position: Option<Vec<f64>>,
    pub information: DMatrix<f64>,
    pub weight: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationFile {
    pub dim: usize,
    pub rows: Vec<ObservationRow>,
    pub manifest: Option<String>,
}

pub const SCALAR_HEADER: &[&str] = &["t", "p", "info"];
pub const PLANAR_HEADER: &[&str] = &["t", "x", "y", "ixx", "ixy", "iyy"];
pub const RAW_ESTIMATE_HEADER: &[&str] = &["t", "x", "y", "ixx", "ixy", "iyy", "w", "provenance"];

/// Reads a scalar (`t,p[,info]`) or planar (`t,x,y,ixx,ixy,iyy[,w,provenance]`)
/// observation file. Timestamps must increase strictly. A missing `info`
/// column means unit information.
pub fn read_observations(path: &Path) -> Result<ObservationFile, IoError> {
    read_observations_with(path, true)
}

/// As [`read_observations`]; with `check_order = false` the time ordering is
/// left to the consumer (a tracker reports it per step).
pub fn read_observations_with(path: &Path, check_order: bool) -> Result<ObservationFile, IoError> {
    let table = Table::read(path)?;
    let planar = table.has("x");
    let dim = if planar { 2 } else { 1 };
    if planar {
        table.require(PLANAR_HEADER)?;
    } else {
        table.require(&["t", "p"])?;
    }
    let times = if check_order {
        table.times()?
    } else {
        (0..table.rows.len()).map(|row| table.f64(row, "t")).collect::<Result<Vec<_>, _>>()?
    };
    let mut rows = Vec::with_capacity(times.len());
    for (row, &t) in times.iter().enumerate() {
        let (position, information) = if planar {
            let x = table.opt_f64(row, "x")?;
            let y = table.opt_f64(row, "y")?;
            let (ixx, ixy, iyy) = (table.f64(row, "ixx")?, table.f64(row, "ixy")?, table.f64(row, "iyy")?);
            let info = DMatrix::from_row_slice(2, 2, &[ixx, ixy, ixy, iyy]);
            let position = match (x, y) {
                (Some(x), Some(y)) => Some(vec![x, y]),
                (None, None) => None,
                _ => return Err(table.err(row, "y", "x and y must both be present or both empty".into())),
            };
            (position, info)
        } else {
            let p = table.opt_f64(row, "p")?;
            let info = table.opt_f64(row, "info")?.unwrap_or(1.0);
            (p.map(|p| vec![p]), DMatrix::from_element(1, 1, info))
        };
        if information.iter().any(|v| !v.is_finite()) {
            return Err(table.err(row, "info", "non-finite information".into()));
        }
        if (0..dim).any(|k| information[(k, k)] < 0.0) {
            return Err(table.err(row, if planar { "ixx" } else { "info" }, "negative information".into()));
        }
        let weight = table.opt_f64(row, "w")?.unwrap_or(1.0);
        let provenance = table.provenance(row)?.unwrap_or(Provenance::Observed);
        rows.push(ObservationRow { line: table.line(row), t, position, information, weight, provenance });
    }
    Ok(ObservationFile { dim, rows, manifest: table.manifest })
}

/// Sensor geometry for the `transform` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeometryConfig {
    RangeBearing {
        site: SensorSite,
        range_variance: f64,
        bearing_variance: f64,
    },
    TwoBearings {
        sites: [SensorSite; 2],
        bearing_variance: [f64; 2],
    },
    TwoRanges {
        sites: [SensorSite; 2],
        range_variance: [f64; 2],
        /// Picks between the two circle intersections: the one nearer this point.
        disambiguator: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryFile {
    #[serde(flatten)]
    pub config: GeometryConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_threshold: Option<f64>,
}

impl GeometryConfig {
    pub fn reading_columns(&self) -> [&'static str; 2] {
        match self {
            GeometryConfig::RangeBearing { .. } => ["range", "bearing"],
            GeometryConfig::TwoBearings { .. } => ["bearing_a", "bearing_b"],
            GeometryConfig::TwoRanges { .. } => ["range_a", "range_b"],
        }
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| IoError::Json { path: path.to_path_buf(), message: e.to_string() })
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self, IoError> {
        Ok(Self { path: path.display().to_string(), sha256: sha256_hex(&read_bytes(path)?) })
    }
}

/// Everything needed to reproduce a run. The hash covers all fields except
/// itself.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_target: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_achieved: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_bracket: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlation: Option<String>,
    #[serde(default)]
    pub vector: bool,
    #[serde(default)]
    pub inputs: Vec<FileDigest>,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            schema: SCHEMA.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            ..Default::default()
        }
    }

    pub fn compute_hash(&self) -> String {
        let mut bare = self.clone();
        bare.hash = None;
        sha256_hex(&serde_json::to_vec(&bare).expect("serializable"))
    }

    /// Fills in `hash` and returns it.
    pub fn seal(&mut self) -> String {
        let h = self.compute_hash();
        self.hash = Some(h.clone());
        h
    }
}

/// `traj.csv` -> `traj.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_stem().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}
