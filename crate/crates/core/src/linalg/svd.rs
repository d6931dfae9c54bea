use ndarray::{s, Array2, Axis};
use ndarray_linalg::{JobSvd, SVDDC, SVD};

use super::{DenseMatrix, LinalgError, LinalgResult, C64};

/// Relative gap (in units of the leading singular value) below which a cut
/// between two singular values is reported as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// Thin singular value decomposition `M = U diag(sigma) V†`.
///
/// Columns of `u` are gauge-fixed: the largest-magnitude entry of every left
/// singular vector is real and positive, with the matching row of `v_dagger`
/// rotated by the inverse phase.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdResult {
    pub u: Array2<C64>,
    pub sigma: Vec<f64>,
    pub v_dagger: Array2<C64>,
    /// Set by [`svd_truncated`] when the kept and the first dropped singular
    /// values coincide to within [`DEGENERACY_TOLERANCE`]`·σ₁`.
    pub degenerate_cut: bool,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U diag(sigma) V†`.
    pub fn reconstruct(&self) -> Array2<C64> {
        let mut us = self.u.clone();
        for (mut col, &s) in us.axis_iter_mut(Axis(1)).zip(&self.sigma) {
            col.mapv_inplace(|z| z * s);
        }
        us.dot(&self.v_dagger)
    }
}

pub fn svd_full(m: &DenseMatrix) -> LinalgResult<SvdResult> {
    let a = m.as_array();
    let (u, sigma, vt) = match a.svddc(JobSvd::Some) {
        Ok((Some(u), s, Some(vt))) => (u, s, vt),
        // gesdd occasionally fails where the QR-iteration driver succeeds.
        _ => match a.svd(true, true) {
            Ok((Some(u), s, Some(vt))) => {
                let k = s.len();
                (
                    u.slice(s![.., ..k]).to_owned(),
                    s,
                    vt.slice(s![..k, ..]).to_owned(),
                )
            }
            Ok(_) => return Err(LinalgError::NumericalFailure("missing factors".into())),
            Err(e) => return Err(LinalgError::NumericalFailure(e.to_string())),
        },
    };
    let mut sigma = sigma.to_vec();
    // LAPACK returns non-negative values already; clamp signed zeros and
    // guard the ordering against roundoff.
    for s in sigma.iter_mut() {
        *s = s.max(0.0);
    }
    debug_assert!(sigma.windows(2).all(|w| w[0] >= w[1]));
    let (u, v_dagger) = fix_gauge(u, vt);
    Ok(SvdResult {
        u,
        sigma,
        v_dagger,
        degenerate_cut: false,
    })
}

/// Leading `keep` singular triplets of `m`.
pub fn svd_truncated(m: &DenseMatrix, keep: usize) -> LinalgResult<SvdResult> {
    let max = m.rows().min(m.cols());
    if keep == 0 || keep > max {
        return Err(LinalgError::InvalidRank { keep, max });
    }
    let full = svd_full(m)?;
    Ok(truncate(full, keep))
}

pub(crate) fn truncate(full: SvdResult, keep: usize) -> SvdResult {
    let degenerate_cut = is_degenerate_cut(&full.sigma, keep);
    SvdResult {
        u: full.u.slice(s![.., ..keep]).to_owned(),
        sigma: full.sigma[..keep].to_vec(),
        v_dagger: full.v_dagger.slice(s![..keep, ..]).to_owned(),
        degenerate_cut,
    }
}

pub(crate) fn is_degenerate_cut(sigma: &[f64], keep: usize) -> bool {
    match (sigma.first(), sigma.get(keep.wrapping_sub(1)), sigma.get(keep)) {
        (Some(&s1), Some(&a), Some(&b)) => (a - b).abs() <= DEGENERACY_TOLERANCE * s1,
        _ => false,
    }
}

fn fix_gauge(mut u: Array2<C64>, mut vt: Array2<C64>) -> (Array2<C64>, Array2<C64>) {
    for j in 0..u.ncols() {
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for (i, z) in u.column(j).iter().enumerate() {
            let a = z.norm();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if best_abs <= 0.0 {
            continue;
        }
        let phase = u[[best, j]].conj() / best_abs;
        u.column_mut(j).mapv_inplace(|z| z * phase);
        let inv = phase.conj();
        vt.row_mut(j).mapv_inplace(|z| z * inv);
    }
    (u, vt)
}
