//! Two-site DMRG with per-bond truncation chosen by the bond controller.

mod env;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use env::Environment;
pub(crate) use env::EffectiveHamiltonian;

use crate::controller::{controller_update, BondControllerState, ControlMode, ControllerConfig, ControllerTrace};
use crate::linalg::{eigs_lowest, BackendPolicy, DenseMatrix, EigOptions, LinalgError};
use crate::models::{build_mpo, Family, MatrixProductOperator, ModelError, ModelSpec};
use crate::mps::{split::split_with_policy, Absorb, MatrixProductState, MpsError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DmrgError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("internal consistency: {0}")]
    InternalConsistency(String),
    #[error("eigensolver failed at bond {bond}: {source}")]
    Eigensolver { bond: usize, source: LinalgError },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mps(#[from] MpsError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type DmrgResult<T> = Result<T, DmrgError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// `|0101…⟩`
    Neel,
    /// Gaussian random MPS; see [`DmrgConfig::starting_chi`].
    Random { seed: u64 },
}

impl InitialState {
    /// Néel for Heisenberg-type chains, seeded random otherwise.
    pub fn for_family(family: Family) -> Self {
        match family {
            Family::HeisenbergXxz => Self::Neel,
            Family::TransverseIsing => Self::Random { seed: 1 },
        }
    }

    pub fn build(self, n: usize, d: usize, chi: usize) -> DmrgResult<MatrixProductState> {
        Ok(match self {
            Self::Neel => {
                let states: Vec<usize> = (0..n).map(|i| i % 2).collect();
                MatrixProductState::product_state(n, d, &states)?
            }
            Self::Random { seed } => MatrixProductState::random(n, d, chi.max(1), seed)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmrgConfig {
    pub max_sweeps: usize,
    /// Stop once `|ΔE/E|` between full sweeps drops below this.
    pub eps_conv: f64,
    pub eig_tol: f64,
    pub eig_max_iter: usize,
    pub krylov_dim: usize,
    pub controller: ControllerConfig,
    /// `None` picks by model family.
    pub initial_state: Option<InitialState>,
    /// Singular values below `trunc_floor·σ₁` are always dropped.
    pub trunc_floor: f64,
    pub backend: BackendPolicy,
}

impl Default for DmrgConfig {
    fn default() -> Self {
        Self {
            max_sweeps: 30,
            eps_conv: 1e-8,
            eig_tol: 1e-10,
            eig_max_iter: 4000,
            krylov_dim: 32,
            controller: ControllerConfig::default(),
            initial_state: None,
            trunc_floor: 1e-14,
            backend: BackendPolicy::default(),
        }
    }
}

impl DmrgConfig {
    /// Fixed bond dimension `chi`, keeping every non-zero singular value up
    /// to that rank.
    pub fn fixed(chi: usize) -> Self {
        Self {
            controller: ControllerConfig::fixed(chi),
            trunc_floor: 0.0,
            ..Self::default()
        }
    }

    /// PID-controlled bond dimension up to `chi_max`.
    pub fn adaptive(chi_max: usize) -> Self {
        Self {
            controller: ControllerConfig {
                chi_max,
                ..ControllerConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> DmrgResult<()> {
        if self.max_sweeps == 0 {
            return Err(DmrgError::InvalidConfig("max_sweeps must be at least 1".into()));
        }
        if !(self.eps_conv > 0.0) {
            return Err(DmrgError::InvalidConfig("eps_conv must be positive".into()));
        }
        if !(self.eig_tol > 0.0) || self.eig_max_iter == 0 || self.krylov_dim < 2 {
            return Err(DmrgError::InvalidConfig("eigensolver settings out of range".into()));
        }
        if !(0.0..1.0).contains(&self.trunc_floor) {
            return Err(DmrgError::InvalidConfig("trunc_floor must lie in [0, 1)".into()));
        }
        self.controller
            .validate()
            .map_err(|e| DmrgError::InvalidConfig(e.to_string()))
    }

    /// Bond dimension of a random starting state: the working χ of a fixed
    /// run, `chi_min` for a controlled one.
    pub fn starting_chi(&self) -> usize {
        match self.controller.mode {
            ControlMode::Fixed => self.controller.chi_max,
            _ => self.controller.chi_min,
        }
    }

    fn eig_options(&self) -> EigOptions {
        EigOptions {
            tol: self.eig_tol,
            max_iter: self.eig_max_iter,
            krylov_dim: self.krylov_dim,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub sweep_index: usize,
    pub energy: f64,
    /// Relative change from the previous sweep; 1 for the first sweep.
    pub delta_e_rel: f64,
    pub chi_profile: Vec<usize>,
    /// Entropy in nats at each bond's last visit.
    pub entropy_profile: Vec<f64>,
    pub max_trunc_error: f64,
    pub wall_time: f64,
    pub parameter_count: usize,
    pub average_chi: f64,
}

impl SweepRecord {
    pub fn max_chi(&self) -> usize {
        self.chi_profile.iter().copied().max().unwrap_or(1)
    }
}

/// One controller update, tagged with where it happened.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub sweep: usize,
    /// 0 for the left-to-right half, 1 for the way back.
    pub half: u8,
    pub bond: usize,
    pub trace: ControllerTrace,
}

#[derive(Clone, Debug)]
pub struct DmrgOutcome {
    pub mps: MatrixProductState,
    pub records: Vec<SweepRecord>,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
    /// `(sweep, E_k − E_{k−1})` for every sweep whose energy went up by more
    /// than 10⁻¹⁰·|E|.
    pub energy_increases: Vec<(usize, f64)>,
}

impl DmrgOutcome {
    pub fn energy(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.energy)
    }

    pub fn sweeps(&self) -> usize {
        self.records.len()
    }

    /// Wall time summed over all sweeps.
    pub fn wall_time(&self) -> f64 {
        self.records.iter().map(|r| r.wall_time).sum()
    }

    /// Largest bond dimension reached at the end of any sweep.
    pub fn max_chi_used(&self) -> usize {
        self.records.iter().map(SweepRecord::max_chi).max().unwrap_or(1)
    }
}

/// Mutable state threaded through the sweeps of one run.
struct Sweeper<'a> {
    mpo: &'a MatrixProductOperator,
    cfg: &'a DmrgConfig,
    opts: EigOptions,
}

struct BondResult {
    energy: f64,
    trunc_error: f64,
    entropy: f64,
}

impl Sweeper<'_> {
    #[allow(clippy::too_many_arguments)]
    fn optimize_bond(
        &self,
        mps: &mut MatrixProductState,
        env: &mut Environment,
        state: &mut BondControllerState,
        i: usize,
        absorb: Absorb,
        trace: &mut Option<ControllerTrace>,
    ) -> DmrgResult<BondResult> {
        let d = mps.phys_dim();
        let chi_l = mps.site(i).left_dim();
        let chi_r = mps.site(i + 1).right_dim();
        let theta = mps.site(i).left_matrix().dot(&mps.site(i + 1).right_matrix());
        let heff = EffectiveHamiltonian::new(env.left(i)?, self.mpo.site(i), self.mpo.site(i + 1), env.right(i + 2)?);
        let v0: Vec<_> = theta.iter().copied().collect();
        let pair = eigs_lowest(|x, y| heff.apply(x, y), heff.dim(), &v0, &self.opts)
            .map_err(|source| DmrgError::Eigensolver { bond: i, source })?;
        let theta = DenseMatrix::from_row_major(chi_l * d, d * chi_r, pair.vector.to_vec())?;
        let backend_chi = mps.site(i).right_dim();
        let ctrl = &self.cfg.controller;
        let split = split_with_policy(
            &theta,
            d,
            self.cfg.trunc_floor,
            absorb,
            i,
            &self.cfg.backend,
            backend_chi,
            |spectrum| {
                let (chi, t) = controller_update(state, spectrum, ctrl);
                *trace = Some(t);
                chi
            },
        )?;
        let result = BondResult {
            energy: pair.value,
            trunc_error: split.outcome.truncation_error,
            entropy: split.outcome.entropy,
        };
        match absorb {
            Absorb::Right => {
                mps.set_pair(i, split.left, split.right, i + 1);
                env.invalidate_site(i + 1);
                env.update_left(i, mps.site(i), self.mpo);
            }
            Absorb::Left => {
                mps.set_pair(i, split.left, split.right, i);
                env.invalidate_site(i);
                env.update_right(i + 1, mps.site(i + 1), self.mpo);
            }
        }
        Ok(result)
    }
}

/// One full sweep: bonds `0…N−2` left to right, then `N−2…0` back.
///
/// `mps` must be canonical at site 0 with `env` built for that gauge. Each
/// bond visit solves the local eigenproblem seeded with the current two-site
/// tensor and lets the bond's controller pick the kept rank from the new
/// spectrum.
pub fn two_site_sweep(
    mps: &mut MatrixProductState,
    mpo: &MatrixProductOperator,
    env: &mut Environment,
    cfg: &DmrgConfig,
    states: &mut [BondControllerState],
    sweep_index: usize,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> DmrgResult<SweepRecord> {
    let n = mps.len();
    if n < 2 || mpo.len() != n || states.len() != n - 1 || env.len() != n {
        return Err(DmrgError::InternalConsistency(format!(
            "{n} sites, {} MPO sites, {} controllers, {} environment sites",
            mpo.len(),
            states.len(),
            env.len()
        )));
    }
    if mps.canonical_center() != Some(0) {
        return Err(DmrgError::InternalConsistency("sweep must start canonical at site 0".into()));
    }
    let start = Instant::now();
    let sweeper = Sweeper {
        mpo,
        cfg,
        opts: cfg.eig_options(),
    };
    let mut entropy = vec![0.0; n - 1];
    let mut max_trunc: f64 = 0.0;
    let mut energy = f64::NAN;
    let order = (0..n - 1).map(|i| (i, Absorb::Right, 0u8)).chain((0..n - 1).rev().map(|i| (i, Absorb::Left, 1u8)));
    for (i, absorb, half) in order {
        let mut t = None;
        let r = sweeper.optimize_bond(mps, env, &mut states[i], i, absorb, &mut t)?;
        energy = r.energy;
        entropy[i] = r.entropy;
        max_trunc = max_trunc.max(r.trunc_error);
        if let (Some(rows), Some(trace)) = (trace.as_deref_mut(), t) {
            rows.push(TraceRow {
                sweep: sweep_index,
                half,
                bond: i,
                trace,
            });
        }
    }
    Ok(SweepRecord {
        sweep_index,
        energy,
        delta_e_rel: 1.0,
        chi_profile: mps.bond_dims(),
        entropy_profile: entropy,
        max_trunc_error: max_trunc,
        wall_time: start.elapsed().as_secs_f64(),
        parameter_count: mps.parameter_count(),
        average_chi: mps.average_bond_dim(),
    })
}

/// Ground state of `spec` by repeated two-site sweeps.
pub fn run_dmrg(spec: &ModelSpec, cfg: &DmrgConfig) -> DmrgResult<DmrgOutcome> {
    spec.validate()?;
    cfg.validate()?;
    let mpo = build_mpo(spec)?;
    let init = cfg.initial_state.unwrap_or(InitialState::for_family(spec.family));
    let mps = init.build(spec.n, mpo.phys_dim(), cfg.starting_chi())?;
    run_dmrg_from(&mpo, mps, cfg)
}

/// Like [`run_dmrg`] with an explicit operator and starting state.
pub fn run_dmrg_from(
    mpo: &MatrixProductOperator,
    mps: MatrixProductState,
    cfg: &DmrgConfig,
) -> DmrgResult<DmrgOutcome> {
    cfg.validate()?;
    let n = mps.len();
    if n < 2 || mpo.len() != n || mpo.phys_dim() != mps.phys_dim() {
        return Err(DmrgError::InvalidConfig(format!(
            "{n}-site state against a {}-site operator",
            mpo.len()
        )));
    }
    let mut mps = mps.canonicalize(0)?;
    mps.normalize();
    let mut env = Environment::build(&mps, mpo, 0);
    let mut states = vec![BondControllerState::cold_start(cfg.controller.chi_min); n - 1];
    let mut records: Vec<SweepRecord> = Vec::new();
    let mut trace = Vec::new();
    let mut energy_increases = Vec::new();
    let mut converged = false;
    for sweep in 0..cfg.max_sweeps {
        let mut rec = two_site_sweep(&mut mps, mpo, &mut env, cfg, &mut states, sweep, Some(&mut trace))?;
        if let Some(prev) = records.last() {
            let change = rec.energy - prev.energy;
            rec.delta_e_rel = (change / rec.energy).abs();
            if change > 1e-10 * rec.energy.abs() {
                energy_increases.push((sweep, change));
            }
            converged = rec.delta_e_rel < cfg.eps_conv;
        }
        records.push(rec);
        if converged {
            break;
        }
    }
    Ok(DmrgOutcome {
        mps,
        records,
        converged,
        trace,
        energy_increases,
    })
}

/// `⟨Ψ|H|Ψ⟩` by full contraction; `mps` is assumed normalized.
pub fn expectation_energy(mps: &MatrixProductState, mpo: &MatrixProductOperator) -> DmrgResult<f64> {
    if mps.len() != mpo.len() || mps.phys_dim() != mpo.phys_dim() {
        return Err(DmrgError::InvalidConfig(format!(
            "{}-site state against a {}-site operator",
            mps.len(),
            mpo.len()
        )));
    }
    Ok(env::contract_expectation(mps, mpo).re)
}

/// Total variation distance `½ Σ |pᵢ − qᵢ|`.
pub fn tvd(p: &[f64], q: &[f64]) -> DmrgResult<f64> {
    if p.len() != q.len() {
        return Err(DmrgError::InvalidDistribution(format!("lengths {} and {}", p.len(), q.len())));
    }
    for (name, v) in [("p", p), ("q", q)] {
        if v.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(DmrgError::InvalidDistribution(format!("{name} has a negative or non-finite entry")));
        }
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(DmrgError::InvalidDistribution(format!("{name} sums to {total}")));
        }
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}
