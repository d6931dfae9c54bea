//! Dense linear-algebra contracts used throughout the crate.
//!
//! Everything here works on complex double-precision matrices stored in
//! row-major order. The heavy lifting is delegated to LAPACK through
//! `ndarray-linalg`; this module adds input validation, a deterministic gauge
//! for singular vectors, a restarted Lanczos solver for the lowest eigenpair of
//! a Hermitian operator, and the backend dispatch rule that decides whether a
//! factorization may be sent to an accelerator.

mod backend;
mod lanczos;
pub(crate) mod svd;

use ndarray::{Array1, Array2, ArrayView2};
use ndarray_linalg::{EigValsh, Eigh, UPLO};
use num_complex::Complex64;
use thiserror::Error;

pub use backend::{
    global_registry, install_registry, select_backend, BackendId, BackendPolicy,
    BackendRegistry, SvdBackend,
};
pub use lanczos::{eigs_lowest, EigOptions, EigPair};
pub use svd::{svd_full, svd_truncated, SvdResult, DEGENERACY_TOLERANCE};

pub type C64 = Complex64;

pub type LinalgResult<T> = Result<T, LinalgError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    /// The matrix is empty or holds NaN/Inf entries.
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    /// LAPACK reported a failure (e.g. the SVD did not converge).
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("rank {keep} outside the admissible range 1..={max}")]
    InvalidRank { keep: usize, max: usize },

    /// The iterative eigensolver exhausted its budget.
    #[error("eigensolver did not converge, best residual {residual:.3e}")]
    EigenNonConvergence { residual: f64 },

    #[error("invalid starting vector: {0}")]
    InvalidStart(String),
}

/// A finite, non-empty complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    data: Array2<C64>,
}

impl DenseMatrix {
    pub fn new(data: Array2<C64>) -> LinalgResult<Self> {
        let (rows, cols) = data.dim();
        if rows == 0 || cols == 0 {
            return Err(LinalgError::InvalidMatrix(format!("shape {rows}x{cols}")));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self { data })
    }

    pub fn from_real(data: &Array2<f64>) -> LinalgResult<Self> {
        Self::new(data.mapv(|x| C64::new(x, 0.0)))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> LinalgResult<Self> {
        let data = Array2::from_shape_vec((rows, cols), entries)
            .map_err(|e| LinalgError::InvalidMatrix(e.to_string()))?;
        Self::new(data)
    }

    pub fn identity(n: usize) -> LinalgResult<Self> {
        Self::new(Array2::eye(n))
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, C64> {
        self.data.view()
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn into_inner(self) -> Array2<C64> {
        self.data
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.data.view())
    }
}

pub fn frobenius(m: &ArrayView2<'_, C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Conjugate transpose.
pub fn adjoint(m: &ArrayView2<'_, C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// `Σ conj(a_i) b_i`.
pub fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Full spectrum and eigenvectors of a dense Hermitian matrix, eigenvalues
/// ascending.
pub fn eigh_dense(h: &Array2<C64>) -> LinalgResult<(Array1<f64>, Array2<C64>)> {
    check_square(h.dim())?;
    h.eigh(UPLO::Lower)
        .map_err(|e| LinalgError::NumericalFailure(e.to_string()))
}

/// Eigenvalues (ascending) of a dense real symmetric matrix.
pub fn eigvalsh_real(h: &Array2<f64>) -> LinalgResult<Array1<f64>> {
    check_square(h.dim())?;
    h.eigvalsh(UPLO::Lower)
        .map_err(|e| LinalgError::NumericalFailure(e.to_string()))
}

fn check_square((r, c): (usize, usize)) -> LinalgResult<()> {
    if r == 0 || r != c {
        return Err(LinalgError::InvalidMatrix(format!("expected square, got {r}x{c}")));
    }
    Ok(())
}
