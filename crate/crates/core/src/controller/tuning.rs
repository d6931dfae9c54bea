use serde::Serialize;

use super::{pid_step_towards, BondControllerState, ControllerConfig, ControllerError, ControllerResult, PidGains};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TuneReport {
    pub k_ultimate: f64,
    /// Oscillation period in controller steps.
    pub t_ultimate: f64,
    pub tuned: PidGains,
}

impl TuneReport {
    pub fn from_ultimate(k_ultimate: f64, t_ultimate: f64) -> Self {
        Self {
            k_ultimate,
            t_ultimate,
            tuned: PidGains {
                kp: 0.6 * k_ultimate,
                ki: 1.2 * k_ultimate / t_ultimate,
                kd: 0.075 * k_ultimate * t_ultimate,
            },
        }
    }
}

/// Period of a sustained oscillation in `series`, if there is one.
///
/// Requires at least three sign alternations among the non-zero first
/// differences and a peak-to-peak amplitude of at least 2. The period is the
/// mean spacing of the local maxima.
pub fn detect_oscillation(series: &[usize]) -> Option<f64> {
    if series.len() < 3 {
        return None;
    }
    let lo = *series.iter().min()?;
    let hi = *series.iter().max()?;
    if hi - lo < 2 {
        return None;
    }
    // (index of the step, sign) for every non-zero difference
    let steps: Vec<(usize, i64)> = series
        .windows(2)
        .enumerate()
        .filter_map(|(k, w)| {
            let d = w[1] as i64 - w[0] as i64;
            (d != 0).then_some((k, d.signum()))
        })
        .collect();
    let alternations = steps.windows(2).filter(|w| w[0].1 != w[1].1).count();
    if alternations < 3 {
        return None;
    }
    let maxima: Vec<usize> = steps
        .windows(2)
        .filter(|w| w[0].1 > 0 && w[1].1 < 0)
        .map(|w| w[1].0)
        .collect();
    if maxima.len() < 2 {
        return None;
    }
    let span = (maxima[maxima.len() - 1] - maxima[0]) as f64;
    Some(span / (maxima.len() - 1) as f64)
}

/// Raises a pure proportional gain along `kp_grid` until the closed loop
/// around `plant` (χ → measured entropy) oscillates in the last `sweeps/2`
/// steps, then applies the Ziegler–Nichols prescription.
///
/// The loop uses the target, EMA and bounds of `base`; prediction is off.
pub fn ziegler_nichols_tune<P>(
    mut plant: P,
    kp_grid: &[f64],
    sweeps: usize,
    base: &ControllerConfig,
) -> ControllerResult<TuneReport>
where
    P: FnMut(usize) -> f64,
{
    if kp_grid.is_empty() || sweeps < 4 {
        return Err(ControllerError::InvalidConfig(
            "tuning needs a non-empty grid and at least 4 sweeps".into(),
        ));
    }
    for &kp in kp_grid {
        let cfg = ControllerConfig {
            gains: PidGains::new(kp, 0.0, 0.0),
            ..base.clone()
        };
        let mut state = BondControllerState::new(cfg.chi_min);
        let mut chis = Vec::with_capacity(sweeps);
        for _ in 0..sweeps {
            let s = plant(state.chi);
            state.ema_update(s, cfg.alpha_ema);
            let target = cfg.target_for(state.chi);
            let ema = state.ema;
            chis.push(pid_step_towards(&mut state, ema, target, &cfg).chi);
        }
        if let Some(period) = detect_oscillation(&chis[sweeps - sweeps / 2..]) {
            return Ok(TuneReport::from_ultimate(kp, period));
        }
    }
    Err(ControllerError::NoUltimateGain {
        grid_len: kp_grid.len(),
        kp_max: kp_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}
