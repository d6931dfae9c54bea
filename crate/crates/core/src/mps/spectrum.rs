use super::{MpsError, MpsResult};

/// Values below this fraction of the leading singular value are treated as
/// numerical noise when computing entropies.
pub const ENTROPY_CUTOFF: f64 = 1e-14;

/// Schmidt coefficients across one bond, sorted non-increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularSpectrum {
    values: Vec<f64>,
    bond_index: usize,
}

impl SingularSpectrum {
    pub fn new(values: Vec<f64>, bond_index: usize) -> MpsResult<Self> {
        if values.is_empty() {
            return Err(MpsError::DegenerateSpectrum);
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(MpsError::InvalidSpectrum("negative or non-finite value".into()));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(MpsError::InvalidSpectrum("values not sorted non-increasing".into()));
        }
        if values[0] == 0.0 {
            return Err(MpsError::DegenerateSpectrum);
        }
        Ok(Self { values, bond_index })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn bond_index(&self) -> usize {
        self.bond_index
    }

    /// Number of values strictly above `rel_floor·λ₁`.
    pub fn rank_above(&self, rel_floor: f64) -> usize {
        let cut = rel_floor * self.values[0];
        self.values.iter().take_while(|&&v| v > cut).count()
    }

    /// Entropy of the leading `k` values renormalized among themselves.
    pub fn entropy_of_leading(&self, k: usize) -> f64 {
        von_neumann(&self.values[..k.clamp(1, self.values.len())])
    }
}

/// Von Neumann entropy (nats) of the Schmidt distribution `p_k = λ_k²/Σλ²`.
pub fn entropy_from_spectrum(spec: &SingularSpectrum) -> f64 {
    von_neumann(&spec.values)
}

fn von_neumann(values: &[f64]) -> f64 {
    let cut = ENTROPY_CUTOFF * values[0];
    let kept = values.iter().copied().filter(|&v| v >= cut && v > 0.0);
    let total: f64 = kept.clone().map(|v| v * v).sum();
    let s: f64 = kept
        .map(|v| v * v / total)
        .map(|p| if p > 0.0 { -p * p.ln() } else { 0.0 })
        .sum();
    s.max(0.0)
}

/// `sqrt(Σ_{k>kept} λ_k²)`.
pub fn truncation_error(spec: &SingularSpectrum, kept: usize) -> MpsResult<f64> {
    if kept == 0 || kept > spec.len() {
        return Err(MpsError::InvalidRank {
            kept,
            max: spec.len(),
        });
    }
    Ok(spec.values[kept..].iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// What happened at one truncated split.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncationOutcome {
    pub kept_chi: usize,
    pub truncation_error: f64,
    /// Entropy of the full (pre-truncation) spectrum, nats.
    pub entropy: f64,
    pub spectrum: SingularSpectrum,
    pub degenerate_cut: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(v: &[f64]) -> SingularSpectrum {
        SingularSpectrum::new(v.to_vec(), 0).unwrap()
    }

    #[test]
    fn product_cut_has_zero_entropy() {
        assert_eq!(entropy_from_spectrum(&spec(&[1.0])), 0.0);
    }

    #[test]
    fn bell_pair_entropy() {
        let h = 0.5f64.sqrt();
        let s = entropy_from_spectrum(&spec(&[h, h]));
        assert!((s - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn skewed_pair_entropy() {
        // −0.9 ln 0.9 − 0.1 ln 0.1
        let expected = 0.325_082_973_391_448_2;
        let s = entropy_from_spectrum(&spec(&[0.9f64.sqrt(), 0.1f64.sqrt()]));
        assert!((s - expected).abs() < 1e-12);
        assert!((expected - 0.325083).abs() < 1e-6);
    }

    #[test]
    fn unnormalized_values_are_normalized() {
        let a = entropy_from_spectrum(&spec(&[3.0, 1.0]));
        let b = entropy_from_spectrum(&spec(&[0.3, 0.1]));
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn zero_spectrum_is_degenerate() {
        assert_eq!(
            SingularSpectrum::new(vec![0.0, 0.0], 3),
            Err(MpsError::DegenerateSpectrum)
        );
        assert!(matches!(
            SingularSpectrum::new(vec![0.1, 0.5], 0),
            Err(MpsError::InvalidSpectrum(_))
        ));
    }

    #[test]
    fn truncation_error_values() {
        let s = spec(&[0.8f64.sqrt(), 0.2f64.sqrt()]);
        assert_eq!(truncation_error(&s, 2).unwrap(), 0.0);
        assert!((truncation_error(&s, 1).unwrap() - 0.447_213_595_499_958).abs() < 1e-12);
        assert_eq!(truncation_error(&spec(&[1.0, 0.0]), 1).unwrap(), 0.0);
        assert!(matches!(truncation_error(&s, 0), Err(MpsError::InvalidRank { .. })));
        assert!(matches!(truncation_error(&s, 3), Err(MpsError::InvalidRank { .. })));
    }

    fn sorted_spectrum() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1e-6f64..10.0, 1..40).prop_map(|mut v| {
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            v
        })
    }

    proptest! {
        #[test]
        fn entropy_bounded_by_log_length(v in sorted_spectrum()) {
            let s = entropy_from_spectrum(&spec(&v));
            prop_assert!(s >= 0.0);
            prop_assert!(s <= (v.len() as f64).ln() + 1e-12);
        }

        #[test]
        fn truncation_error_non_increasing(v in sorted_spectrum()) {
            let s = spec(&v);
            let errs: Vec<f64> = (1..=v.len()).map(|k| truncation_error(&s, k).unwrap()).collect();
            prop_assert!(errs.windows(2).all(|w| w[1] <= w[0]));
        }
    }
}
