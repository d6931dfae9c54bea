use num_complex::Complex64;
use serde::Serialize;

use super::{ControllerError, ControllerResult, PidGains};
use crate::mps::SingularSpectrum;

/// Change in entropy when the kept rank grows from `chi_star` to
/// `chi_star + 1`, each truncated spectrum renormalized on its own.
pub fn loop_gain_estimate(spectrum: &SingularSpectrum, chi_star: usize) -> ControllerResult<f64> {
    if chi_star == 0 || chi_star + 1 > spectrum.len() {
        return Err(ControllerError::InsufficientSpectrum {
            len: spectrum.len(),
            chi_star,
        });
    }
    Ok(spectrum.entropy_of_leading(chi_star + 1) - spectrum.entropy_of_leading(chi_star))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub loop_gain: f64,
    pub pole_moduli: (f64, f64),
    /// `1 + gK_d > 0`
    pub jury_a: bool,
    /// `a₂ + a₀ > |a₁|`
    pub jury_b: bool,
    /// `a₀² > a₂⁻² (a₁/2)²`
    pub jury_c: bool,
    /// Both poles strictly inside the unit circle.
    pub stable: bool,
}

impl StabilityReport {
    pub fn jury_verdict(&self) -> bool {
        self.jury_a && self.jury_b && self.jury_c
    }
}

/// Poles of `a₂z² − a₁z + a₀` with `a₂ = 1 + gK_p + gK_d`,
/// `a₁ = 2 + gK_p − gK_i − 2gK_d`, `a₀ = 1 + gK_d`, together with the three
/// inequality checks on its coefficients.
pub fn jury_stability(gains: &PidGains, g: f64) -> ControllerResult<StabilityReport> {
    let a2 = 1.0 + g * gains.kp + g * gains.kd;
    let a1 = 2.0 + g * gains.kp - g * gains.ki - 2.0 * g * gains.kd;
    let a0 = 1.0 + g * gains.kd;
    if a2.abs() < f64::EPSILON {
        return Err(ControllerError::DegeneratePolynomial);
    }
    let disc = Complex64::new(a1 * a1 - 4.0 * a2 * a0, 0.0).sqrt();
    let z1 = (a1 + disc) / (2.0 * a2);
    let z2 = (a1 - disc) / (2.0 * a2);
    let (m1, m2) = (z1.norm(), z2.norm());
    Ok(StabilityReport {
        loop_gain: g,
        pole_moduli: (m1.max(m2), m1.min(m2)),
        jury_a: a0 > 0.0,
        jury_b: a2 + a0 > a1.abs(),
        jury_c: a0 * a0 > (a1 / 2.0).powi(2) / (a2 * a2),
        stable: m1 < 1.0 && m2 < 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn uniform_spectrum_gain_is_inverse_chi() {
        for chi in [16usize, 32, 100] {
            let s = SingularSpectrum::new(vec![0.3; chi + 5], 0).unwrap();
            let g = loop_gain_estimate(&s, chi).unwrap();
            assert!((g * chi as f64 - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn exponential_spectrum_gain_is_small() {
        let s = SingularSpectrum::new((1..=30).map(|k| (-(k as f64)).exp()).collect(), 0).unwrap();
        let g = loop_gain_estimate(&s, 10).unwrap();
        assert!(g >= 0.0 && g < 0.1 / 10.0);
    }

    #[test]
    fn gain_needs_one_more_value() {
        let s = SingularSpectrum::new(vec![1.0; 8], 0).unwrap();
        assert!(matches!(
            loop_gain_estimate(&s, 8),
            Err(ControllerError::InsufficientSpectrum { len: 8, chi_star: 8 })
        ));
    }

    #[test]
    fn default_gains_are_stable_on_the_claimed_range() {
        let gains = PidGains::default();
        let r = jury_stability(&gains, 1.0 / 128.0).unwrap();
        assert!(r.stable && r.jury_verdict());
        let chi_star = 8.0;
        for k in 1..=300 {
            let g = 3.0 / chi_star * k as f64 / 300.0;
            let r = jury_stability(&gains, g).unwrap();
            assert!(r.stable, "g = {g}");
        }
    }

    #[test]
    fn integral_dominated_gains_are_unstable() {
        let r = jury_stability(&PidGains::new(2.0, 2000.0, 0.5), 1.0 / 8.0).unwrap();
        assert!(!r.stable);
        assert!(r.pole_moduli.0 >= 1.0);
        assert!(!r.jury_verdict());
    }

    #[test]
    fn jury_agrees_with_poles_on_random_samples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let mut disagreements = 0;
        let mut unstable = 0;
        for _ in 0..1000 {
            let gains = PidGains::new(
                rng.random_range(0.0..10.0),
                rng.random_range(0.0..200.0),
                rng.random_range(0.0..5.0),
            );
            let g = 1.0 - rng.random::<f64>();
            let r = jury_stability(&gains, g).unwrap();
            if !r.stable {
                unstable += 1;
            }
            if r.stable != r.jury_verdict() {
                disagreements += 1;
            }
        }
        assert_eq!(disagreements, 0);
        assert!(unstable > 50, "sample should cover both verdicts, got {unstable}");
    }
}
