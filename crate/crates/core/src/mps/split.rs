use ndarray::Axis;

use super::{entropy_from_spectrum, MpsError, MpsResult, SingularSpectrum, SiteTensor, TruncationOutcome};
use crate::linalg::{svd::is_degenerate_cut, BackendPolicy, DenseMatrix, global_registry};

/// Which side receives the singular values after a split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Absorb {
    /// `left = U·Λ`, `right = V†`; the center moves left.
    Left,
    /// `left = U`, `right = Λ·V†`; the center moves right.
    Right,
}

#[derive(Clone, Debug)]
pub struct TwoSiteSplit {
    pub left: SiteTensor,
    /// Kept singular values.
    pub lambda: SingularSpectrum,
    pub right: SiteTensor,
    pub outcome: TruncationOutcome,
}

/// Splits `θ` with rows `(a, s₁)` and columns `(s₂, b)` into two site tensors.
///
/// Keeps `min(chi_request, #{σ > trunc_floor·σ₁}, rank)` singular values.
/// `bond_index` is only recorded on the returned spectra.
pub fn split_two_site(
    theta: &DenseMatrix,
    phys_dim: usize,
    chi_request: usize,
    trunc_floor: f64,
    absorb: Absorb,
    bond_index: usize,
) -> MpsResult<TwoSiteSplit> {
    if chi_request == 0 {
        return Err(MpsError::InvalidRank { kept: 0, max: theta.rows().min(theta.cols()) });
    }
    split_with_policy(
        theta,
        phys_dim,
        trunc_floor,
        absorb,
        bond_index,
        &BackendPolicy::default(),
        chi_request,
        |_| chi_request,
    )
}

/// Like [`split_two_site`], but the requested rank is chosen by `choose`
/// after the full spectrum is known. `backend_chi` drives backend selection.
#[allow(clippy::too_many_arguments)]
pub(crate) fn split_with_policy<F>(
    theta: &DenseMatrix,
    phys_dim: usize,
    trunc_floor: f64,
    absorb: Absorb,
    bond_index: usize,
    policy: &BackendPolicy,
    backend_chi: usize,
    choose: F,
) -> MpsResult<TwoSiteSplit>
where
    F: FnOnce(&SingularSpectrum) -> usize,
{
    let d = phys_dim;
    if d == 0 || theta.rows() % d != 0 || theta.cols() % d != 0 {
        return Err(MpsError::InvalidTensor(format!(
            "{}x{} is not divisible by d = {d}",
            theta.rows(),
            theta.cols()
        )));
    }
    if theta.frobenius_norm() == 0.0 {
        return Err(MpsError::DegenerateSpectrum);
    }
    let svd = global_registry().svd(policy, backend_chi, theta)?;
    let spectrum = SingularSpectrum::new(svd.sigma.clone(), bond_index)?;
    let chi_request = choose(&spectrum).max(1);
    let kept = chi_request
        .min(spectrum.rank_above(trunc_floor).max(1))
        .min(spectrum.len());
    let truncation_error = super::truncation_error(&spectrum, kept)?;
    let degenerate_cut = is_degenerate_cut(&svd.sigma, kept);

    let mut u = svd.u.slice_move(ndarray::s![.., ..kept]);
    let mut vt = svd.v_dagger.slice_move(ndarray::s![..kept, ..]);
    let sigma = &svd.sigma[..kept];
    match absorb {
        Absorb::Left => {
            for (mut col, &s) in u.axis_iter_mut(Axis(1)).zip(sigma) {
                col.mapv_inplace(|z| z * s);
            }
        }
        Absorb::Right => {
            for (mut row, &s) in vt.axis_iter_mut(Axis(0)).zip(sigma) {
                row.mapv_inplace(|z| z * s);
            }
        }
    }
    let lambda = SingularSpectrum::new(sigma.to_vec(), bond_index)?;
    let outcome = TruncationOutcome {
        kept_chi: kept,
        truncation_error,
        entropy: entropy_from_spectrum(&spectrum),
        spectrum,
        degenerate_cut,
    };
    Ok(TwoSiteSplit {
        left: SiteTensor::from_left_matrix(u, d),
        lambda,
        right: SiteTensor::from_right_matrix(vt, d),
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::random_matrix;
    use crate::linalg::{frobenius, svd_full, C64};
    use ndarray::Array2;
    use proptest::prelude::*;

    fn contract(split: &TwoSiteSplit) -> Array2<C64> {
        split.left.left_matrix().dot(&split.right.right_matrix())
    }

    #[test]
    fn singlet_split() {
        let h = 0.5f64.sqrt();
        let mut t = Array2::<C64>::zeros((2, 2));
        t[[0, 1]] = C64::new(h, 0.0);
        t[[1, 0]] = C64::new(-h, 0.0);
        let s = split_two_site(&DenseMatrix::new(t).unwrap(), 2, 2, 1e-14, Absorb::Right, 0).unwrap();
        assert_eq!(s.outcome.kept_chi, 2);
        for v in s.lambda.values() {
            assert!((v - h).abs() < 1e-15);
        }
        assert!((s.outcome.entropy - 2f64.ln()).abs() < 1e-14);
        assert_eq!(s.left.right_dim(), 2);
        assert_eq!(s.right.left_dim(), 2);
    }

    #[test]
    fn product_split() {
        let mut t = Array2::<C64>::zeros((2, 2));
        t[[0, 0]] = C64::new(1.0, 0.0);
        let s = split_two_site(&DenseMatrix::new(t).unwrap(), 2, 4, 1e-14, Absorb::Left, 0).unwrap();
        assert_eq!(s.outcome.kept_chi, 1);
        assert_eq!(s.outcome.truncation_error, 0.0);
    }

    #[test]
    fn truncation_error_matches_full_svd_tail() {
        let a = random_matrix(8, 8, 31);
        let m = DenseMatrix::new(a.clone()).unwrap();
        let full = svd_full(&m).unwrap();
        let tail = full.sigma[3..].iter().map(|s| s * s).sum::<f64>().sqrt();
        let s = split_two_site(&m, 2, 3, 1e-14, Absorb::Right, 0).unwrap();
        assert_eq!(s.outcome.kept_chi, 3);
        assert!((s.outcome.truncation_error - tail).abs() <= 1e-12 * tail);
        let err = frobenius(&(&a - &contract(&s)).view());
        assert!((err - tail).abs() <= 1e-8 * tail);
    }

    #[test]
    fn zero_theta_is_degenerate() {
        let m = DenseMatrix::new(Array2::zeros((4, 4))).unwrap();
        assert!(matches!(
            split_two_site(&m, 2, 2, 1e-14, Absorb::Right, 0),
            Err(MpsError::DegenerateSpectrum)
        ));
    }

    #[test]
    fn floor_limits_rank() {
        let mut t = Array2::<C64>::zeros((4, 4));
        t[[0, 0]] = C64::new(1.0, 0.0);
        t[[1, 1]] = C64::new(1e-12, 0.0);
        let m = DenseMatrix::new(t).unwrap();
        assert_eq!(split_two_site(&m, 2, 4, 1e-10, Absorb::Right, 0).unwrap().outcome.kept_chi, 1);
        assert_eq!(split_two_site(&m, 2, 4, 1e-14, Absorb::Right, 0).unwrap().outcome.kept_chi, 2);
    }

    #[test]
    fn absorbing_side_controls_isometry() {
        let m = DenseMatrix::new(random_matrix(6, 8, 9)).unwrap();
        let r = split_two_site(&m, 2, 6, 1e-14, Absorb::Right, 0).unwrap();
        assert!(r.left.left_isometry_error() < 1e-12);
        let l = split_two_site(&m, 2, 6, 1e-14, Absorb::Left, 0).unwrap();
        assert!(l.right.right_isometry_error() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn full_rank_round_trip(cl in 1usize..5, cr in 1usize..5, seed in any::<u64>(), left in any::<bool>()) {
            let a = random_matrix(2 * cl, 2 * cr, seed);
            let m = DenseMatrix::new(a.clone()).unwrap();
            let side = if left { Absorb::Left } else { Absorb::Right };
            let s = split_two_site(&m, 2, 64, 0.0, side, 0).unwrap();
            let rel = frobenius(&(&a - &contract(&s)).view()) / frobenius(&a.view());
            prop_assert!(rel <= 1e-10);
        }
    }
}
