use std::path::{Path, PathBuf};

use adaptchi::dmrg::{DmrgConfig, InitialState};
use adaptchi::models::{Convention, Family, ModelSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Experiment {
    Dmrg,
    Ablate,
    ScanHamiltonians,
    Scaling,
    TunePid,
    StabilityMap,
    SvdBench,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Dmrg => "dmrg",
            Self::Ablate => "ablate",
            Self::ScanHamiltonians => "scan_hamiltonians",
            Self::Scaling => "scaling",
            Self::TunePid => "tune_pid",
            Self::StabilityMap => "stability_map",
            Self::SvdBench => "svd_bench",
        }
    }
}

/// Closed-loop plant used by `tune_pid`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Plant {
    /// `S(χ) = min(s_true, ln χ)`.
    Saturated { s_true: f64 },
    /// `S(χ) = s` regardless of χ.
    Constant { s: f64 },
    /// Mid-chain entropy of a fixed-χ ground state of `model`.
    Live,
}

fn default_sizes() -> Vec<usize> {
    vec![10, 20, 40]
}

fn default_svd_chis() -> Vec<usize> {
    vec![32, 64, 128, 256, 512]
}

fn default_kp_grid() -> Vec<f64> {
    (1..=200).map(|k| k as f64 * 0.5).collect()
}

/// Knobs that only some experiments read.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Chain lengths for `scaling`.
    pub sizes: Vec<usize>,
    /// Bond dimensions for `svd_bench`; matrices are `2χ × 2χ`.
    pub svd_chis: Vec<usize>,
    /// Operating point for `stability_map`.
    pub chi_star: usize,
    pub g_points: usize,
    /// Upper end of the loop-gain grid; `3/chi_star` when absent.
    pub g_max: Option<f64>,
    pub plant: Plant,
    pub kp_grid: Vec<f64>,
    pub tune_sweeps: usize,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            sizes: default_sizes(),
            svd_chis: default_svd_chis(),
            chi_star: 8,
            g_points: 48,
            g_max: None,
            plant: Plant::Saturated { s_true: 1.5 },
            kp_grid: default_kp_grid(),
            tune_sweeps: 80,
        }
    }
}

fn default_model() -> ModelSpec {
    ModelSpec::heisenberg(20, Convention::Pauli)
}

fn default_repetitions() -> usize {
    3
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Filled in from the command line when absent.
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default = "default_model")]
    pub model: ModelSpec,
    #[serde(default)]
    pub dmrg: DmrgConfig,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub params: Params,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            BenchError::Config(format!(
                "key `{path}` (line {}, column {}): {inner}",
                inner.line(),
                inner.column()
            ))
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            BenchError::Config(m) => BenchError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(e) = o.experiment {
            self.experiment = Some(e);
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(m));
        if self.experiment.is_none() {
            return bad("no experiment selected".into());
        }
        if self.repetitions < 1 {
            return bad("repetitions must be at least 1".into());
        }
        self.model.validate().map_err(|e| BenchError::Config(format!("model: {e}")))?;
        self.dmrg.validate().map_err(|e| BenchError::Config(format!("dmrg: {e}")))?;
        let p = &self.params;
        if p.sizes.is_empty() || p.sizes.iter().any(|&n| n < 2) {
            return bad(format!("params.sizes = {:?}", p.sizes));
        }
        if p.svd_chis.is_empty() || p.svd_chis.contains(&0) {
            return bad(format!("params.svd_chis = {:?}", p.svd_chis));
        }
        if p.chi_star == 0 || p.g_points == 0 {
            return bad("params.chi_star and params.g_points must be positive".into());
        }
        if let Some(g) = p.g_max {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("params.g_max = {g}"));
            }
        }
        if p.kp_grid.is_empty()
            || p.kp_grid.iter().any(|k| !(*k > 0.0 && k.is_finite()))
            || p.kp_grid.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("params.kp_grid must be positive and strictly ascending".into());
        }
        if p.tune_sweeps < 4 {
            return bad("params.tune_sweeps must be at least 4".into());
        }
        Ok(())
    }

    pub fn experiment(&self) -> Experiment {
        self.experiment.expect("validated config")
    }

    /// SHA-256 of the canonical JSON form, ignoring where results are written.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// The DMRG configuration for `spec`, with the experiment seed driving a
    /// random starting state when none is given.
    pub fn dmrg_for(&self, spec: &ModelSpec, dmrg: &DmrgConfig) -> DmrgConfig {
        let mut cfg = dmrg.clone();
        if cfg.initial_state.is_none() {
            cfg.initial_state = Some(match spec.family {
                Family::HeisenbergXxz => InitialState::Neel,
                Family::TransverseIsing => InitialState::Random { seed: self.seed },
            });
        }
        cfg
    }
}
