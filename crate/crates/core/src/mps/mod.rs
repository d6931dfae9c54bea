//! Matrix product states with open boundaries.
//!
//! Site tensors are indexed `(left, phys, right)` and stored row-major, so a
//! tensor reshapes for free into either a `(left·phys) × right` or a
//! `left × (phys·right)` matrix.

mod snapshot;
mod spectrum;
pub(crate) mod split;

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use ndarray_linalg::QR;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::linalg::{adjoint, LinalgError, C64};

pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use spectrum::{
    entropy_from_spectrum, truncation_error, SingularSpectrum, TruncationOutcome, ENTROPY_CUTOFF,
};
pub use split::{split_two_site, Absorb, TwoSiteSplit};

/// Largest chain for which [`MatrixProductState::to_statevector`] is allowed.
pub const STATEVECTOR_MAX_SITES: usize = 20;

pub type MpsResult<T> = Result<T, MpsError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpsError {
    #[error("basis index {index} at site {site} is out of range for d = {d}")]
    InvalidBasisState { site: usize, index: usize, d: usize },

    #[error("singular spectrum is empty or identically zero")]
    DegenerateSpectrum,

    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("kept rank {kept} outside 1..={max}")]
    InvalidRank { kept: usize, max: usize },

    #[error("{n} sites exceeds the statevector limit of {max}")]
    SizeGuard { n: usize, max: usize },

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("invalid site index {0}")]
    InvalidSite(usize),

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One rank-3 tensor `A[left, phys, right]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    data: Array3<C64>,
}

impl SiteTensor {
    pub fn new(data: Array3<C64>) -> MpsResult<Self> {
        let (l, d, r) = data.dim();
        if l == 0 || d == 0 || r == 0 {
            return Err(MpsError::InvalidTensor(format!("shape ({l}, {d}, {r})")));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(MpsError::InvalidTensor("non-finite entry".into()));
        }
        Ok(Self::from_array(data))
    }

    /// Skips the finiteness scan; shapes must still be non-empty.
    pub(crate) fn from_array(data: Array3<C64>) -> Self {
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().into_owned()
        };
        Self { data }
    }

    pub(crate) fn from_left_matrix(m: Array2<C64>, d: usize) -> Self {
        let (rows, r) = m.dim();
        let m = m.as_standard_layout().into_owned();
        Self::from_array(m.into_shape_with_order((rows / d, d, r)).expect("shape"))
    }

    pub(crate) fn from_right_matrix(m: Array2<C64>, d: usize) -> Self {
        let (l, cols) = m.dim();
        let m = m.as_standard_layout().into_owned();
        Self::from_array(m.into_shape_with_order((l, d, cols / d)).expect("shape"))
    }

    pub fn left_dim(&self) -> usize {
        self.data.dim().0
    }

    pub fn phys_dim(&self) -> usize {
        self.data.dim().1
    }

    pub fn right_dim(&self) -> usize {
        self.data.dim().2
    }

    pub fn data(&self) -> &Array3<C64> {
        &self.data
    }

    pub fn into_inner(self) -> Array3<C64> {
        self.data
    }

    /// `(left·phys) × right` view.
    pub fn left_matrix(&self) -> ArrayView2<'_, C64> {
        let (l, d, r) = self.data.dim();
        self.data.view().into_shape_with_order((l * d, r)).expect("standard layout")
    }

    /// `left × (phys·right)` view.
    pub fn right_matrix(&self) -> ArrayView2<'_, C64> {
        let (l, d, r) = self.data.dim();
        self.data.view().into_shape_with_order((l, d * r)).expect("standard layout")
    }

    /// Max-norm deviation of `Σ_{a,s} conj(A[a,s,b]) A[a,s,b']` from the identity.
    pub fn left_isometry_error(&self) -> f64 {
        let m = self.left_matrix();
        identity_deviation(&adjoint(&m).dot(&m))
    }

    /// Max-norm deviation of `Σ_{s,b} A[a,s,b] conj(A[a',s,b])` from the identity.
    pub fn right_isometry_error(&self) -> f64 {
        let m = self.right_matrix();
        identity_deviation(&m.dot(&adjoint(&m)))
    }
}

fn identity_deviation(m: &Array2<C64>) -> f64 {
    let mut worst = 0.0f64;
    for ((i, j), z) in m.indexed_iter() {
        let target = if i == j { 1.0 } else { 0.0 };
        worst = worst.max((z - target).norm());
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixProductState {
    sites: Vec<SiteTensor>,
    center: Option<usize>,
}

impl MatrixProductState {
    /// Checks boundary and bond compatibility. The canonical center is unknown.
    pub fn new(sites: Vec<SiteTensor>) -> MpsResult<Self> {
        let n = sites.len();
        if n == 0 {
            return Err(MpsError::InvalidTensor("empty chain".into()));
        }
        if sites[0].left_dim() != 1 || sites[n - 1].right_dim() != 1 {
            return Err(MpsError::InvalidTensor("boundary bond dimensions must be 1".into()));
        }
        let d = sites[0].phys_dim();
        for (i, w) in sites.windows(2).enumerate() {
            if w[0].right_dim() != w[1].left_dim() {
                return Err(MpsError::InvalidTensor(format!(
                    "bond {i}: {} vs {}",
                    w[0].right_dim(),
                    w[1].left_dim()
                )));
            }
        }
        if sites.iter().any(|s| s.phys_dim() != d) {
            return Err(MpsError::InvalidTensor("non-uniform physical dimension".into()));
        }
        Ok(Self { sites, center: None })
    }

    pub fn product_state(n: usize, d: usize, local_states: &[usize]) -> MpsResult<Self> {
        if n == 0 || d == 0 || local_states.len() != n {
            return Err(MpsError::InvalidTensor(format!(
                "{} local states for {n} sites",
                local_states.len()
            )));
        }
        let mut sites = Vec::with_capacity(n);
        for (site, &index) in local_states.iter().enumerate() {
            if index >= d {
                return Err(MpsError::InvalidBasisState { site, index, d });
            }
            let mut a = Array3::<C64>::zeros((1, d, 1));
            a[[0, index, 0]] = C64::new(1.0, 0.0);
            sites.push(SiteTensor::from_array(a));
        }
        Ok(Self {
            sites,
            center: Some(0),
        })
    }

    /// Gaussian random tensors with bond dimensions `min(chi, dⁱ, d^{N−i})`,
    /// brought to canonical form at site 0 and normalized.
    pub fn random(n: usize, d: usize, chi: usize, seed: u64) -> MpsResult<Self> {
        if n == 0 || d == 0 || chi == 0 {
            return Err(MpsError::InvalidTensor(format!("n={n}, d={d}, chi={chi}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = capped_bond_dims(n, d, chi);
        let mut sites = Vec::with_capacity(n);
        for i in 0..n {
            let l = if i == 0 { 1 } else { dims[i - 1] };
            let r = if i == n - 1 { 1 } else { dims[i] };
            let a = Array3::from_shape_simple_fn((l, d, r), || {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im)
            });
            sites.push(SiteTensor::from_array(a));
        }
        let mut mps = Self { sites, center: None };
        mps.canonicalize_in_place(0)?;
        mps.normalize();
        Ok(mps)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn phys_dim(&self) -> usize {
        self.sites[0].phys_dim()
    }

    pub fn sites(&self) -> &[SiteTensor] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &SiteTensor {
        &self.sites[i]
    }

    pub fn canonical_center(&self) -> Option<usize> {
        self.center
    }

    /// `χ_1 … χ_{N−1}`.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.len() - 1].iter().map(|s| s.right_dim()).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// `Σᵢ d·χᵢ₋₁·χᵢ`.
    pub fn parameter_count(&self) -> usize {
        self.sites
            .iter()
            .map(|s| s.left_dim() * s.phys_dim() * s.right_dim())
            .sum()
    }

    /// Mean of the internal bond dimensions; 1 for a single site.
    pub fn average_bond_dim(&self) -> f64 {
        let dims = self.bond_dims();
        if dims.is_empty() {
            return 1.0;
        }
        dims.iter().sum::<usize>() as f64 / dims.len() as f64
    }

    /// Replaces sites `i` and `i+1`, leaving the center at `center`.
    pub(crate) fn set_pair(&mut self, i: usize, left: SiteTensor, right: SiteTensor, center: usize) {
        self.sites[i] = left;
        self.sites[i + 1] = right;
        self.center = Some(center);
    }

    /// Moves to mixed-canonical form around `center` using QR/LQ sweeps.
    pub fn canonicalize(mut self, center: usize) -> MpsResult<Self> {
        self.canonicalize_in_place(center)?;
        Ok(self)
    }

    pub fn canonicalize_in_place(&mut self, center: usize) -> MpsResult<()> {
        let n = self.len();
        if center >= n {
            return Err(MpsError::InvalidSite(center));
        }
        let d = self.phys_dim();
        for i in 0..center {
            let (q, r) = self.sites[i].left_matrix().qr().map_err(lapack)?;
            let next = r.dot(&self.sites[i + 1].right_matrix());
            self.sites[i] = SiteTensor::from_left_matrix(q, d);
            self.sites[i + 1] = SiteTensor::from_right_matrix(next, d);
        }
        for i in (center + 1..n).rev() {
            // LQ of M through the QR of M†.
            let mh = adjoint(&self.sites[i].right_matrix());
            let (q, r) = mh.qr().map_err(lapack)?;
            let next = self.sites[i - 1].left_matrix().dot(&adjoint(&r.view()));
            self.sites[i] = SiteTensor::from_right_matrix(adjoint(&q.view()), d);
            self.sites[i - 1] = SiteTensor::from_left_matrix(next, d);
        }
        self.center = Some(center);
        Ok(())
    }

    /// `⟨self|other⟩` by transfer-matrix contraction.
    pub fn overlap(&self, other: &Self) -> MpsResult<C64> {
        if self.len() != other.len() || self.phys_dim() != other.phys_dim() {
            return Err(MpsError::InvalidTensor("mismatched chains".into()));
        }
        let mut e = Array2::<C64>::from_elem((1, 1), C64::new(1.0, 0.0));
        for (a, b) in self.sites.iter().zip(&other.sites) {
            let (_, d, ra) = a.data.dim();
            let rb = b.right_dim();
            let mut next = Array2::<C64>::zeros((ra, rb));
            for s in 0..d {
                let a_s = a.data.index_axis(Axis(1), s);
                let b_s = b.data.index_axis(Axis(1), s);
                next = next + adjoint(&a_s).dot(&e).dot(&b_s);
            }
            e = next;
        }
        Ok(e[[0, 0]])
    }

    pub fn norm_squared(&self) -> f64 {
        self.overlap(self).map(|z| z.re).unwrap_or(0.0)
    }

    /// Rescales to unit norm; the canonical center (or site 0) absorbs the factor.
    pub fn normalize(&mut self) -> f64 {
        let nrm = self.norm_squared().sqrt();
        if nrm > 0.0 {
            let c = self.center.unwrap_or(0);
            self.sites[c].data.mapv_inplace(|z| z / nrm);
        }
        nrm
    }

    /// Schmidt spectrum across the bond between sites `bond` and `bond+1`.
    pub fn bond_spectrum(&self, bond: usize) -> MpsResult<SingularSpectrum> {
        if bond + 1 >= self.len() {
            return Err(MpsError::InvalidSite(bond));
        }
        let mps = self.clone().canonicalize(bond)?;
        let m = crate::linalg::DenseMatrix::new(mps.sites[bond].left_matrix().to_owned())?;
        let svd = crate::linalg::svd_full(&m)?;
        SingularSpectrum::new(svd.sigma, bond)
    }

    /// Amplitudes indexed with site 0 as the most significant digit.
    pub fn to_statevector(&self) -> MpsResult<Array1<C64>> {
        let n = self.len();
        if n > STATEVECTOR_MAX_SITES {
            return Err(MpsError::SizeGuard {
                n,
                max: STATEVECTOR_MAX_SITES,
            });
        }
        let mut psi = Array2::<C64>::from_elem((1, 1), C64::new(1.0, 0.0));
        for a in &self.sites {
            let (_, d, r) = a.data.dim();
            let rows = psi.nrows();
            let next = psi.dot(&a.right_matrix());
            psi = next.into_shape_with_order((rows * d, r)).expect("standard layout");
        }
        Ok(psi.column(0).to_owned())
    }
}

pub(crate) fn capped_bond_dims(n: usize, d: usize, chi: usize) -> Vec<usize> {
    let cap = |k: usize| -> usize {
        let mut v = 1usize;
        for _ in 0..k {
            v = v.saturating_mul(d);
            if v >= chi {
                return chi;
            }
        }
        v.min(chi)
    };
    (1..n).map(|i| cap(i).min(cap(n - i))).collect()
}

fn lapack(e: ndarray_linalg::error::LinalgError) -> MpsError {
    MpsError::Linalg(LinalgError::NumericalFailure(e.to_string()))
}
