use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};

use super::{norm, vdot, LinalgError, LinalgResult, C64};

/// Settings for [`eigs_lowest`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigOptions {
    /// Convergence when `‖Hv − Ev‖ ≤ tol·max(1, |E|)`.
    pub tol: f64,
    /// Budget of operator applications.
    pub max_iter: usize,
    /// Largest Krylov basis kept before a restart from the current Ritz vector.
    pub krylov_dim: usize,
}

impl Default for EigOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            krylov_dim: 32,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigPair {
    pub value: f64,
    /// Unit-normalized.
    pub vector: Array1<C64>,
    pub residual: f64,
    pub matvecs: usize,
}

/// Lowest eigenpair of the Hermitian operator `apply_h` (`out = H·v`) acting
/// on a `dim`-dimensional space, found by restarted Lanczos with full
/// reorthogonalization.
pub fn eigs_lowest<F>(
    mut apply_h: F,
    dim: usize,
    v0: &[C64],
    opts: &EigOptions,
) -> LinalgResult<EigPair>
where
    F: FnMut(&[C64], &mut [C64]),
{
    if v0.len() != dim || dim == 0 {
        return Err(LinalgError::InvalidStart(format!(
            "length {} for dimension {dim}",
            v0.len()
        )));
    }
    let n0 = norm(v0);
    if !(n0 > 0.0) || !n0.is_finite() {
        return Err(LinalgError::InvalidStart("zero or non-finite norm".into()));
    }
    let kmax = opts.krylov_dim.max(2).min(dim);
    let mut x: Array1<C64> = v0.iter().map(|z| z / n0).collect();
    let mut hx = Array1::<C64>::zeros(dim);
    apply_h(x.as_slice().unwrap(), hx.as_slice_mut().unwrap());
    let mut matvecs = 1usize;
    let mut best_residual = f64::INFINITY;

    loop {
        // Rayleigh quotient and residual of the current iterate.
        let e = vdot(x.as_slice().unwrap(), hx.as_slice().unwrap()).re;
        let r = &hx - &x.mapv(|z| z * e);
        let res = norm(r.as_slice().unwrap());
        best_residual = best_residual.min(res);
        if res <= opts.tol * e.abs().max(1.0) {
            return Ok(EigPair {
                value: e,
                vector: x,
                residual: res,
                matvecs,
            });
        }
        if matvecs >= opts.max_iter {
            return Err(LinalgError::EigenNonConvergence {
                residual: best_residual,
            });
        }

        // Build a Krylov basis starting from x; the first step reuses Hx.
        let mut basis: Vec<Array1<C64>> = vec![x.clone()];
        let mut alphas = vec![e];
        let mut betas: Vec<f64> = Vec::new();
        let mut w = r;
        let scale = e.abs().max(1.0);
        loop {
            let k = basis.len();
            // Two passes of classical Gram-Schmidt keep the basis orthonormal.
            for _ in 0..2 {
                for q in &basis {
                    let c = vdot(q.as_slice().unwrap(), w.as_slice().unwrap());
                    w.zip_mut_with(q, |wi, qi| *wi -= c * qi);
                }
            }
            let beta = norm(w.as_slice().unwrap());
            if beta <= 1e-14 * scale || k >= kmax || matvecs >= opts.max_iter {
                break;
            }
            let q = w.mapv(|z| z / beta);
            let mut hq = Array1::<C64>::zeros(dim);
            apply_h(q.as_slice().unwrap(), hq.as_slice_mut().unwrap());
            matvecs += 1;
            let alpha = vdot(q.as_slice().unwrap(), hq.as_slice().unwrap()).re;
            betas.push(beta);
            alphas.push(alpha);
            let mut next = hq;
            next.zip_mut_with(&q, |ni, qi| *ni -= qi * alpha);
            next.zip_mut_with(&basis[k - 1], |ni, pi| *ni -= pi * beta);
            basis.push(q);
            w = next;

            let (theta, y) = lowest_ritz(&alphas, &betas)?;
            // ‖w‖ bounds the next Lanczos beta from above, so this estimate
            // of the Ritz residual is conservative.
            let est = norm(w.as_slice().unwrap()) * y[y.len() - 1].abs();
            if est <= 0.1 * opts.tol * theta.abs().max(1.0) {
                break;
            }
        }

        // Restart from the Ritz vector.
        let (_, y) = lowest_ritz(&alphas, &betas)?;
        let mut next = Array1::<C64>::zeros(dim);
        for (q, &c) in basis.iter().zip(y.iter()) {
            next.zip_mut_with(q, |ni, qi| *ni += qi * c);
        }
        let nn = norm(next.as_slice().unwrap());
        x = next.mapv(|z| z / nn);
        apply_h(x.as_slice().unwrap(), hx.as_slice_mut().unwrap());
        matvecs += 1;
    }
}

fn lowest_ritz(alphas: &[f64], betas: &[f64]) -> LinalgResult<(f64, Vec<f64>)> {
    let k = alphas.len();
    if k == 1 {
        return Ok((alphas[0], vec![1.0]));
    }
    let mut t = Array2::<f64>::zeros((k, k));
    for i in 0..k {
        t[[i, i]] = alphas[i];
    }
    for (i, &b) in betas.iter().enumerate() {
        t[[i, i + 1]] = b;
        t[[i + 1, i]] = b;
    }
    let (vals, vecs) = t
        .eigh(UPLO::Lower)
        .map_err(|e| LinalgError::NumericalFailure(e.to_string()))?;
    Ok((vals[0], vecs.column(0).to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh_dense;
    use crate::linalg::testutil::random_hermitian;
    use ndarray::{arr1, Array2};

    fn dense_op(h: &Array2<C64>) -> impl FnMut(&[C64], &mut [C64]) + '_ {
        move |v, out| {
            let n = h.nrows();
            for i in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n {
                    acc += h[[i, j]] * v[j];
                }
                out[i] = acc;
            }
        }
    }

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn diagonal_operator() {
        let d = arr1(&[-1.0, 0.0, 1.0]);
        let op = |v: &[C64], out: &mut [C64]| {
            for i in 0..3 {
                out[i] = v[i] * d[i];
            }
        };
        let r = eigs_lowest(op, 3, &[c(0.3), c(1.0), c(-2.0)], &EigOptions::default()).unwrap();
        assert!((r.value + 1.0).abs() < 1e-12);
        assert!((norm(r.vector.as_slice().unwrap()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_spin_singlet() {
        // S·S on two spin-1/2 in the basis |00>,|01>,|10>,|11>
        let mut h = Array2::<C64>::zeros((4, 4));
        h[[0, 0]] = c(0.25);
        h[[3, 3]] = c(0.25);
        h[[1, 1]] = c(-0.25);
        h[[2, 2]] = c(-0.25);
        h[[1, 2]] = c(0.5);
        h[[2, 1]] = c(0.5);
        let v0 = [c(0.1), c(0.7), c(0.2), c(0.05)];
        let r = eigs_lowest(dense_op(&h), 4, &v0, &EigOptions::default()).unwrap();
        assert!((r.value + 0.75).abs() < 1e-12);
    }

    #[test]
    fn random_hermitian_matches_dense() {
        let h = random_hermitian(64, 77);
        let (vals, _) = eigh_dense(&h).unwrap();
        let v0: Vec<C64> = (0..64).map(|i| C64::new(1.0 + (i as f64).sin(), 0.1 * i as f64)).collect();
        let opts = EigOptions {
            max_iter: 2000,
            ..EigOptions::default()
        };
        let r = eigs_lowest(dense_op(&h), 64, &v0, &opts).unwrap();
        assert!((r.value - vals[0]).abs() <= 1e-9, "{} vs {}", r.value, vals[0]);
        // residual contract
        let mut hv = vec![C64::new(0.0, 0.0); 64];
        dense_op(&h)(r.vector.as_slice().unwrap(), &mut hv);
        let res: f64 = hv
            .iter()
            .zip(r.vector.iter())
            .map(|(a, b)| (a - b * r.value).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(res <= 1e-10 * r.value.abs().max(1.0));
    }

    #[test]
    fn budget_exhaustion_reports_residual() {
        let h = random_hermitian(50, 5);
        let v0: Vec<C64> = (0..50).map(|i| c(1.0 / (1.0 + i as f64))).collect();
        let opts = EigOptions {
            tol: 1e-14,
            max_iter: 3,
            krylov_dim: 2,
        };
        match eigs_lowest(dense_op(&h), 50, &v0, &opts) {
            Err(LinalgError::EigenNonConvergence { residual }) => assert!(residual.is_finite()),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_zero_start() {
        let op = |v: &[C64], out: &mut [C64]| out.copy_from_slice(v);
        assert!(matches!(
            eigs_lowest(op, 2, &[c(0.0), c(0.0)], &EigOptions::default()),
            Err(LinalgError::InvalidStart(_))
        ));
    }

    #[test]
    fn one_dimensional_space() {
        let op = |v: &[C64], out: &mut [C64]| out[0] = v[0] * 3.5;
        let r = eigs_lowest(op, 1, &[c(2.0)], &EigOptions::default()).unwrap();
        assert_eq!(r.value, 3.5);
    }
}
