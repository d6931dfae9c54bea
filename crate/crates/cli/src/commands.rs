use std::collections::HashMap;
use std::path::Path;
use std::time::Instant;

use adaptchi::controller::{jury_stability, ziegler_nichols_tune, ControlMode, ControllerConfig, ControllerError};
use adaptchi::dmrg::{run_dmrg, DmrgConfig, DmrgOutcome};
use adaptchi::linalg::{svd_full, DenseMatrix, C64};
use adaptchi::models::{exact_ground_energy, Convention, ModelSpec};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use crate::config::{Experiment, ExperimentConfig, Plant};
use crate::report::{
    coefficient_of_variation, median, write_csv, write_json, BenchmarkRecord, Cell, Check, Summary, COV_FLAG,
};
use crate::BenchError;

pub const SWEEPS_HEADER: [&str; 7] = ["sweep", "energy", "delta_e_rel", "max_chi", "avg_chi", "max_trunc_err", "wall_s"];

pub const TRACE_HEADER: [&str; 13] = [
    "sweep", "half", "bond", "s_raw", "s_ema", "s_pred", "error", "p", "i", "d", "delta_chi", "chi", "clamped",
];

const COMPARE_HEADER: [&str; 13] = [
    "label",
    "n",
    "energy_per_site",
    "baseline_energy_per_site",
    "delta_e_per_site",
    "median_wall_s",
    "baseline_wall_s",
    "cov",
    "speedup",
    "avg_chi",
    "max_chi",
    "sweeps",
    "converged",
];

/// Per-run switches that are not part of the experiment definition.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub trace: bool,
}

/// A model and DMRG configuration, run `repetitions` times.
struct Arm {
    label: String,
    spec: ModelSpec,
    cfg: DmrgConfig,
}

struct ArmResult {
    record: BenchmarkRecord,
    /// The repetition with the median wall time.
    outcome: DmrgOutcome,
}

fn oracle_energy(spec: &ModelSpec) -> Option<f64> {
    exact_ground_energy(spec).ok()
}

fn run_arm(cfg: &ExperimentConfig, arm: &Arm) -> Result<ArmResult, BenchError> {
    let dmrg = cfg.dmrg_for(&arm.spec, &arm.cfg);
    let mut outcomes = Vec::with_capacity(cfg.repetitions);
    for _ in 0..cfg.repetitions {
        outcomes.push(run_dmrg(&arm.spec, &dmrg)?);
    }
    let times: Vec<f64> = outcomes.iter().map(DmrgOutcome::wall_time).collect();
    let med = median(&times);
    let pick = times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - med).abs().total_cmp(&(b.1 - med).abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let outcome = outcomes.swap_remove(pick);
    let n = arm.spec.n;
    let e = outcome.energy();
    let oracle = oracle_energy(&arm.spec).map(|x| x / n as f64);
    let cov = coefficient_of_variation(&times);
    let last = outcome.records.last().expect("at least one sweep");
    let record = BenchmarkRecord {
        experiment: cfg.experiment().name().into(),
        label: arm.label.clone(),
        config_hash: cfg.hash(),
        n,
        median_wall_time: med,
        coefficient_of_variation: cov,
        cov_flag: cov >= COV_FLAG,
        wall_times: times,
        energy: e,
        energy_per_site: e / n as f64,
        oracle_energy_per_site: oracle,
        delta_e_vs_oracle: oracle.map(|o| e / n as f64 - o),
        baseline: None,
        speedup: None,
        delta_e_vs_baseline: None,
        average_chi: last.average_chi,
        max_chi_used: outcome.max_chi_used(),
        sweeps: outcome.sweeps(),
        converged: outcome.converged,
    };
    Ok(ArmResult { record, outcome })
}

/// `base` with its controller replaced by a fixed bond dimension `chi_max`.
pub fn fixed_variant(base: &DmrgConfig) -> DmrgConfig {
    let fixed = DmrgConfig::fixed(base.controller.chi_max);
    DmrgConfig {
        controller: fixed.controller,
        trunc_floor: fixed.trunc_floor,
        ..base.clone()
    }
}

fn with_mode(base: &DmrgConfig, mode: ControlMode) -> DmrgConfig {
    let mut cfg = base.clone();
    cfg.controller.mode = mode;
    cfg
}

fn adaptive_variant(base: &DmrgConfig) -> DmrgConfig {
    match base.controller.mode {
        ControlMode::Fixed => with_mode(base, ControlMode::Pid),
        _ => base.clone(),
    }
}

fn sweeps_rows(outcome: &DmrgOutcome) -> Vec<Vec<Cell>> {
    outcome
        .records
        .iter()
        .map(|r| {
            vec![
                r.sweep_index.into(),
                r.energy.into(),
                r.delta_e_rel.into(),
                r.max_chi().into(),
                r.average_chi.into(),
                r.max_trunc_error.into(),
                r.wall_time.into(),
            ]
        })
        .collect()
}

fn trace_rows(outcome: &DmrgOutcome) -> Vec<Vec<Cell>> {
    outcome
        .trace
        .iter()
        .map(|t| {
            let c = &t.trace;
            vec![
                t.sweep.into(),
                (t.half as usize).into(),
                t.bond.into(),
                c.s_raw.into(),
                c.s_ema.into(),
                c.s_pred.into(),
                c.error.into(),
                c.p.into(),
                c.i.into(),
                c.d.into(),
                c.delta.into(),
                c.chi.into(),
                c.clamped.into(),
            ]
        })
        .collect()
}

fn compare_row(r: &BenchmarkRecord, base: &BenchmarkRecord) -> Vec<Cell> {
    vec![
        r.label.as_str().into(),
        r.n.into(),
        r.energy_per_site.into(),
        base.energy_per_site.into(),
        r.delta_e_vs_baseline.into(),
        r.median_wall_time.into(),
        base.median_wall_time.into(),
        r.coefficient_of_variation.into(),
        r.speedup.into(),
        r.average_chi.into(),
        r.max_chi_used.into(),
        r.sweeps.into(),
        r.converged.into(),
    ]
}

/// Runs the configured experiment and writes its artifacts under
/// `cfg.output_dir`.
pub fn run(cfg: &ExperimentConfig, opts: RunOptions) -> Result<Summary, BenchError> {
    cfg.validate()?;
    let out = cfg.output_dir.as_path();
    std::fs::create_dir_all(out)?;
    let mut summary = Summary::new(cfg);
    match cfg.experiment() {
        Experiment::Dmrg => cmd_dmrg(cfg, opts, out, &mut summary)?,
        Experiment::Ablate => cmd_ablate(cfg, out, &mut summary)?,
        Experiment::ScanHamiltonians => cmd_scan(cfg, out, &mut summary)?,
        Experiment::Scaling => cmd_scaling(cfg, out, &mut summary)?,
        Experiment::TunePid => cmd_tune(cfg, out, &mut summary)?,
        Experiment::StabilityMap => cmd_stability(cfg, out, &mut summary)?,
        Experiment::SvdBench => cmd_svd(cfg, out, &mut summary)?,
    }
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn cmd_dmrg(cfg: &ExperimentConfig, opts: RunOptions, out: &Path, summary: &mut Summary) -> Result<(), BenchError> {
    let main = run_arm(
        cfg,
        &Arm {
            label: format!("{:?}", cfg.dmrg.controller.mode).to_lowercase(),
            spec: cfg.model,
            cfg: cfg.dmrg.clone(),
        },
    )?;
    write_csv(&out.join("sweeps.csv"), &SWEEPS_HEADER, &sweeps_rows(&main.outcome))?;
    if opts.trace {
        write_csv(&out.join("controller_trace.csv"), &TRACE_HEADER, &trace_rows(&main.outcome))?;
    }
    let mut record = main.record;
    if cfg.dmrg.controller.mode != ControlMode::Fixed {
        let base = run_arm(
            cfg,
            &Arm {
                label: "fixed".into(),
                spec: cfg.model,
                cfg: fixed_variant(&cfg.dmrg),
            },
        )?;
        record.compare_to(&base.record);
        summary.records.push(record);
        summary.records.push(base.record);
    } else {
        summary.records.push(record);
    }
    if !main.outcome.energy_increases.is_empty() {
        summary.notes.push(format!(
            "energy rose between sweeps: {:?}",
            main.outcome.energy_increases
        ));
    }
    Ok(())
}

fn cmd_ablate(cfg: &ExperimentConfig, out: &Path, summary: &mut Summary) -> Result<(), BenchError> {
    let mut threshold = with_mode(&cfg.dmrg, ControlMode::Threshold);
    threshold.controller.eps_trunc = 1e-10;
    let arms = [
        ("fixed", fixed_variant(&cfg.dmrg)),
        ("pid", with_mode(&cfg.dmrg, ControlMode::Pid)),
        ("threshold", threshold),
    ];
    let mut records = Vec::new();
    for (label, dmrg) in arms {
        let r = run_arm(
            cfg,
            &Arm {
                label: label.into(),
                spec: cfg.model,
                cfg: dmrg,
            },
        )?;
        records.push(r.record);
    }
    let base = records[0].clone();
    for r in &mut records {
        r.compare_to(&base);
    }
    let rows: Vec<Vec<Cell>> = records.iter().map(|r| compare_row(r, &base)).collect();
    write_csv(&out.join("ablation.csv"), &COMPARE_HEADER, &rows)?;
    let (pid, thr) = (&records[1], &records[2]);
    summary.checks.push(Check::at_most(
        "pid_energy_vs_fixed_per_site",
        pid.delta_e_vs_baseline.unwrap_or(f64::NAN).abs(),
        1e-4,
    ));
    summary.checks.push(Check::below(
        "pid_avg_chi_minus_threshold_avg_chi",
        pid.average_chi - thr.average_chi,
        1.0,
    ));
    summary.checks.push(Check::below(
        "pid_over_threshold_wall_time",
        pid.median_wall_time / thr.median_wall_time,
        1.0,
    ));
    summary.records = records;
    Ok(())
}

/// The four benchmark Hamiltonians at length `n`.
pub fn benchmark_models(n: usize, convention: Convention) -> [(&'static str, ModelSpec, f64); 4] {
    [
        ("heisenberg", ModelSpec::heisenberg(n, convention), 1e-4),
        ("xxz_jz1.5", ModelSpec::xxz(n, 1.5, convention), 1e-4),
        ("ising_critical", ModelSpec::tfim(n, 1.0, 1.0, convention), 1e-8),
        ("ising_ordered", ModelSpec::tfim(n, 1.0, 0.2, convention), 1e-8),
    ]
}

/// Fixed baseline and adaptive arm for one model.
fn fixed_vs_adaptive(
    cfg: &ExperimentConfig,
    label: &str,
    spec: ModelSpec,
) -> Result<(BenchmarkRecord, BenchmarkRecord), BenchError> {
    let base = run_arm(
        cfg,
        &Arm {
            label: format!("{label}/fixed"),
            spec,
            cfg: fixed_variant(&cfg.dmrg),
        },
    )?
    .record;
    let mut ad = run_arm(
        cfg,
        &Arm {
            label: format!("{label}/adaptive"),
            spec,
            cfg: adaptive_variant(&cfg.dmrg),
        },
    )?
    .record;
    ad.compare_to(&base);
    Ok((ad, base))
}

fn cmd_scan(cfg: &ExperimentConfig, out: &Path, summary: &mut Summary) -> Result<(), BenchError> {
    let mut rows = Vec::new();
    for (label, spec, tol) in benchmark_models(cfg.model.n, cfg.model.convention) {
        let (ad, base) = fixed_vs_adaptive(cfg, label, spec)?;
        rows.push(compare_row(&ad, &base));
        let de = ad.delta_e_vs_baseline.unwrap_or(f64::NAN).abs();
        summary.checks.push(Check::at_most(&format!("{label}_delta_e_per_site"), de, tol));
        summary.checks.push(Check::above(&format!("{label}_speedup"), ad.speedup.unwrap_or(0.0), 1.0));
        summary.records.push(ad);
        summary.records.push(base);
    }
    write_csv(&out.join("scan.csv"), &COMPARE_HEADER, &rows)?;
    Ok(())
}

fn cmd_scaling(cfg: &ExperimentConfig, out: &Path, summary: &mut Summary) -> Result<(), BenchError> {
    let mut rows = Vec::new();
    let mut speedups = HashMap::new();
    for &n in &cfg.params.sizes {
        let spec = ModelSpec { n, ..cfg.model };
        let (ad, base) = fixed_vs_adaptive(cfg, &format!("n{n}"), spec)?;
        rows.push(compare_row(&ad, &base));
        speedups.insert(n, ad.speedup.unwrap_or(f64::NAN));
        if n == 40 {
            let de = ad.delta_e_vs_baseline.unwrap_or(f64::NAN).abs();
            summary.checks.push(Check::at_most("n40_delta_e_per_site", de, 5e-4));
        }
        summary.records.push(ad);
        summary.records.push(base);
    }
    if let (Some(s10), Some(s20)) = (speedups.get(&10), speedups.get(&20)) {
        summary.checks.push(Check::above("speedup_n20_minus_n10", s20 - s10, 0.0));
        if *s10 < 1.0 {
            summary
                .notes
                .push("adaptive run slower than fixed at N = 10, as expected for short chains".into());
        }
    }
    write_csv(&out.join("scaling.csv"), &COMPARE_HEADER, &rows)?;
    Ok(())
}

fn cmd_tune(cfg: &ExperimentConfig, out: &Path, summary: &mut Summary) -> Result<(), BenchError> {
    let p = &cfg.params;
    let base = ControllerConfig {
        beta_predict: 0.0,
        ..cfg.dmrg.controller.clone()
    };
    let result = match p.plant {
        Plant::Saturated { s_true } => {
            ziegler_nichols_tune(|chi| s_true.min((chi as f64).ln()), &p.kp_grid, p.tune_sweeps, &base)
        }
        Plant::Constant { s } => ziegler_nichols_tune(|_| s, &p.kp_grid, p.tune_sweeps, &base),
        Plant::Live => {
            let mut cache: HashMap<usize, f64> = HashMap::new();
            let mut failure = None;
            let spec = cfg.model;
            let mid = spec.n / 2 - 1;
            let plant = |chi: usize| {
                *cache.entry(chi).or_insert_with(|| {
                    let dmrg = cfg.dmrg_for(&spec, &DmrgConfig::fixed(chi));
                    match run_dmrg(&spec, &dmrg) {
                        Ok(o) => o.records.last().map_or(0.0, |r| r.entropy_profile[mid]),
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    }
                })
            };
            let r = ziegler_nichols_tune(plant, &p.kp_grid, p.tune_sweeps, &base);
            if let Some(e) = failure {
                return Err(e.into());
            }
            r
        }
    };
    match result {
        Ok(report) => {
            let doc = json!({
                "schema_version": crate::report::SCHEMA_VERSION,
                "config_hash": cfg.hash(),
                "plant": p.plant,
                "k_ultimate": report.k_ultimate,
                "t_ultimate": report.t_ultimate,
                "tuned": report.tuned,
            });
            write_json(&out.join("tune.json"), &doc)?;
            summary.extra = doc;
            Ok(())
        }
        Err(ControllerError::NoUltimateGain { grid_len, kp_max }) => Err(BenchError::NoUltimateGain { grid_len, kp_max }),
        Err(e) => Err(BenchError::Config(e.to_string())),
    }
}

fn cmd_stability(cfg: &ExperimentConfig, out: &Path, summary: &mut Summary) -> Result<(), BenchError> {
    let p = &cfg.params;
    let gains = cfg.dmrg.controller.gains;
    let claimed = 3.0 / p.chi_star as f64;
    let g_max = p.g_max.unwrap_or(claimed);
    let mut rows = Vec::new();
    let mut max_stable: Option<f64> = None;
    let mut prefix_stable = true;
    let mut claimed_range_stable = true;
    let mut disagreements = 0usize;
    for k in 1..=p.g_points {
        let g = g_max * k as f64 / p.g_points as f64;
        let r = jury_stability(&gains, g).map_err(|e| BenchError::Config(e.to_string()))?;
        if r.stable != r.jury_verdict() {
            disagreements += 1;
        }
        prefix_stable &= r.stable;
        if prefix_stable {
            max_stable = Some(g);
        }
        if g <= claimed {
            claimed_range_stable &= r.stable;
        }
        rows.push(vec![
            g.into(),
            r.pole_moduli.0.into(),
            r.pole_moduli.1.into(),
            r.jury_a.into(),
            r.jury_b.into(),
            r.jury_c.into(),
            r.jury_verdict().into(),
            r.stable.into(),
        ]);
    }
    write_csv(
        &out.join("stability.csv"),
        &["g", "pole_max", "pole_min", "jury_a", "jury_b", "jury_c", "jury_stable", "stable"],
        &rows,
    )?;
    summary.extra = json!({
        "gains": gains,
        "chi_star": p.chi_star,
        "g_max": g_max,
        "max_stable_g": max_stable,
        "jury_disagreements": disagreements,
    });
    summary
        .checks
        .push(Check::at_most("jury_disagreements", disagreements as f64, 0.0));
    summary.checks.push(Check {
        name: "stable_on_0_to_3_over_chi_star".into(),
        passed: claimed_range_stable,
        value: max_stable.unwrap_or(0.0),
        threshold: claimed,
    });
    Ok(())
}

fn random_complex(n: usize, rng: &mut ChaCha8Rng) -> Array2<C64> {
    Array2::from_shape_simple_fn((n, n), || {
        C64::new(StandardNormal.sample(&mut *rng), StandardNormal.sample(&mut *rng))
    })
}

/// Least-squares slope of `ln t` against `ln χ`.
pub fn scaling_exponent(chis: &[usize], times: &[f64]) -> f64 {
    let xs: Vec<f64> = chis.iter().map(|&c| (c as f64).ln()).collect();
    let ys: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn cmd_svd(cfg: &ExperimentConfig, out: &Path, summary: &mut Summary) -> Result<(), BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::new();
    let mut medians = Vec::new();
    for &chi in &cfg.params.svd_chis {
        let m = DenseMatrix::new(random_complex(2 * chi, &mut rng)).map_err(adaptchi::dmrg::DmrgError::from)?;
        svd_full(&m).map_err(adaptchi::dmrg::DmrgError::from)?;
        let mut times = Vec::with_capacity(cfg.repetitions);
        for _ in 0..cfg.repetitions {
            let t0 = Instant::now();
            let r = svd_full(&m).map_err(adaptchi::dmrg::DmrgError::from)?;
            times.push(t0.elapsed().as_secs_f64());
            std::hint::black_box(r);
        }
        let med = median(&times);
        let cov = coefficient_of_variation(&times);
        medians.push(med);
        rows.push(vec![
            chi.into(),
            (2 * chi).into(),
            (2 * chi).into(),
            med.into(),
            cov.into(),
            (cov >= COV_FLAG).into(),
        ]);
    }
    write_csv(
        &out.join("svd_bench.csv"),
        &["chi", "rows", "cols", "median_s", "cov", "cov_flag"],
        &rows,
    )?;
    let slope = (medians.len() >= 2).then(|| scaling_exponent(&cfg.params.svd_chis, &medians));
    summary.extra = json!({ "chis": cfg.params.svd_chis, "median_s": medians, "exponent": slope });
    if let Some(s) = slope {
        summary.checks.push(Check::at_most("exponent_minus_3", (s - 3.0).abs(), 0.5));
    }
    Ok(())
}
