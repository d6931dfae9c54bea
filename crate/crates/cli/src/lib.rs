//! Benchmark harness around `adaptchi`: experiment configs, repeated runs,
//! and CSV/JSON result files.

pub mod commands;
pub mod config;
pub mod report;

use adaptchi::dmrg::DmrgError;
use thiserror::Error;

pub use commands::{run, RunOptions};
pub use config::{Experiment, ExperimentConfig, Overrides, Params, Plant};
pub use report::{BenchmarkRecord, Check, Summary, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Dmrg(#[from] DmrgError),
    #[error("no ultimate gain on a grid of {grid_len} values up to kp = {kp_max}")]
    NoUltimateGain { grid_len: usize, kp_max: f64 },
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const NOT_CONVERGED: i32 = 3;
    pub const THRESHOLD: i32 = 4;
    /// Anything else that went wrong (I/O, numerical breakdown).
    pub const FAILURE: i32 = 1;
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => exit::CONFIG,
            Self::Dmrg(DmrgError::InvalidConfig(_)) => exit::CONFIG,
            Self::NoUltimateGain { .. } => exit::NOT_CONVERGED,
            Self::Io(_) | Self::Dmrg(_) => exit::FAILURE,
        }
    }
}

/// Exit code for a finished experiment.
pub fn summary_exit_code(summary: &Summary) -> i32 {
    if !summary.all_converged() {
        exit::NOT_CONVERGED
    } else if !summary.all_checks_pass() {
        exit::THRESHOLD
    } else {
        exit::SUCCESS
    }
}
