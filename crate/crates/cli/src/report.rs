use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::BenchError;

pub const SCHEMA_VERSION: u32 = 1;

/// Inter-run spread above which a timing is flagged as noisy.
pub const COV_FLAG: f64 = 0.05;

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Sample standard deviation over the mean; zero for a single value.
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    var.sqrt() / mean
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchmarkRecord {
    pub experiment: String,
    pub label: String,
    pub config_hash: String,
    pub n: usize,
    pub wall_times: Vec<f64>,
    pub median_wall_time: f64,
    pub coefficient_of_variation: f64,
    pub cov_flag: bool,
    pub energy: f64,
    pub energy_per_site: f64,
    pub oracle_energy_per_site: Option<f64>,
    /// `E/N − E_exact/N`.
    pub delta_e_vs_oracle: Option<f64>,
    pub baseline: Option<String>,
    /// Baseline median wall time over this record's.
    pub speedup: Option<f64>,
    /// `E/N − E_baseline/N`.
    pub delta_e_vs_baseline: Option<f64>,
    pub average_chi: f64,
    pub max_chi_used: usize,
    pub sweeps: usize,
    pub converged: bool,
}

impl BenchmarkRecord {
    pub fn compare_to(&mut self, baseline: &BenchmarkRecord) {
        self.baseline = Some(baseline.label.clone());
        self.speedup = Some(baseline.median_wall_time / self.median_wall_time);
        self.delta_e_vs_baseline = Some(self.energy_per_site - baseline.energy_per_site);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
        }
    }

    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value > threshold,
            value,
            threshold,
        }
    }

    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            passed: value < threshold,
            value,
            threshold,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub records: Vec<BenchmarkRecord>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    /// Experiment-specific results.
    pub extra: serde_json::Value,
}

impl Summary {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            experiment: cfg.experiment().name().into(),
            config_hash: cfg.hash(),
            config: cfg.clone(),
            records: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            extra: serde_json::Value::Null,
        }
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn all_converged(&self) -> bool {
        self.records.iter().all(|r| r.converged)
    }
}

/// Writes floats with 17 significant digits.
struct Sig17;

impl serde_json::ser::Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", fmt_f64(value))
    }
}

pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        format!("{:.16e}", 0.0)
    } else if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), BenchError> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut ser = serde_json::Serializer::with_formatter(&mut w, Sig17);
    value.serialize(&mut ser).map_err(|e| BenchError::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// One CSV cell.
pub enum Cell {
    F(f64),
    U(usize),
    I(i64),
    B(bool),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::U(u) => u.to_string(),
            Cell::I(i) => i.to_string(),
            Cell::B(b) => b.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(u: usize) -> Self {
        Cell::U(u)
    }
}

impl From<i64> for Cell {
    fn from(i: i64) -> Self {
        Cell::I(i)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::B(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::S(s.into())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::S(String::new()), Cell::F)
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| BenchError::Io(e.to_string()))?;
    w.write_record(header).map_err(|e| BenchError::Io(e.to_string()))?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(row.iter().map(Cell::render))
            .map_err(|e| BenchError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
