//! Spin-chain Hamiltonians as matrix product operators, plus exact references.
//!
//! Basis state `0` is spin up (`σᶻ = +1`). The operators in each model are
//! either Pauli matrices or spin-½ operators `S = σ/2`, chosen by
//! [`Convention`].

mod exact;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::C64;

pub use exact::{
    bethe_reference, bethe_reference_pauli, dense_term_sum, exact_ground_energy,
    exact_ground_energy_sparse, tfim_free_fermion_energy, DENSE_MAX_SITES, SECTOR_MAX_SITES,
};

pub type ModelResult<T> = Result<T, ModelError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("invalid model: {0}")]
    InvalidSpec(String),

    #[error("{n} sites exceeds the limit of {max} for this path")]
    SizeGuard { n: usize, max: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `Σ (jx SˣSˣ + jy SʸSʸ + jz SᶻSᶻ) − h Σ Sᶻ`
    HeisenbergXxz,
    /// `−jz Σ SᶻSᶻ − h Σ Sˣ`
    TransverseIsing,
}

impl FromStr for Family {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "heisenberg_xxz" | "heisenberg" | "xxz" => Ok(Self::HeisenbergXxz),
            "transverse_ising" | "tfim" | "ising" => Ok(Self::TransverseIsing),
            other => Err(ModelError::UnsupportedModel(other.to_owned())),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::HeisenbergXxz => "heisenberg_xxz",
            Self::TransverseIsing => "transverse_ising",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `S = σ/2`
    SpinHalf,
    #[default]
    Pauli,
}

impl Convention {
    pub fn scale(self) -> f64 {
        match self {
            Self::SpinHalf => 0.5,
            Self::Pauli => 1.0,
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    pub n: usize,
    #[serde(default = "one")]
    pub jx: f64,
    #[serde(default = "one")]
    pub jy: f64,
    #[serde(default = "one")]
    pub jz: f64,
    #[serde(default)]
    pub h: f64,
    #[serde(default)]
    pub convention: Convention,
}

impl ModelSpec {
    pub fn heisenberg(n: usize, convention: Convention) -> Self {
        Self::xxz(n, 1.0, convention)
    }

    pub fn xxz(n: usize, jz: f64, convention: Convention) -> Self {
        Self {
            family: Family::HeisenbergXxz,
            n,
            jx: 1.0,
            jy: 1.0,
            jz,
            h: 0.0,
            convention,
        }
    }

    /// `−j Σ ZZ − h Σ X`.
    pub fn tfim(n: usize, j: f64, h: f64, convention: Convention) -> Self {
        Self {
            family: Family::TransverseIsing,
            n,
            jx: 0.0,
            jy: 0.0,
            jz: j,
            h,
            convention,
        }
    }

    pub fn validate(&self) -> ModelResult<()> {
        if self.n < 2 {
            return Err(ModelError::InvalidSpec(format!("n = {} (need at least 2)", self.n)));
        }
        if [self.jx, self.jy, self.jz, self.h].iter().any(|x| !x.is_finite()) {
            return Err(ModelError::InvalidSpec("non-finite coupling".into()));
        }
        Ok(())
    }

    /// Whether total `Sᶻ` is conserved.
    pub fn conserves_sz(&self) -> bool {
        self.family == Family::HeisenbergXxz && self.jx == self.jy
    }
}

/// Local operators `(I, X, Y, Z)` scaled by the convention.
pub(crate) fn local_ops(convention: Convention) -> [Array2<C64>; 4] {
    let c = convention.scale();
    let z0 = C64::new(0.0, 0.0);
    let r = |x: f64| C64::new(x, 0.0);
    let i = |x: f64| C64::new(0.0, x);
    [
        Array2::from_shape_vec((2, 2), vec![r(1.0), z0, z0, r(1.0)]).unwrap(),
        Array2::from_shape_vec((2, 2), vec![z0, r(c), r(c), z0]).unwrap(),
        Array2::from_shape_vec((2, 2), vec![z0, i(-c), i(c), z0]).unwrap(),
        Array2::from_shape_vec((2, 2), vec![r(c), z0, z0, r(-c)]).unwrap(),
    ]
}

/// Operator tensors `W[left, out, in, right]` with unit boundary bonds.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixProductOperator {
    sites: Vec<Array4<C64>>,
    d: usize,
}

impl MatrixProductOperator {
    pub fn new(sites: Vec<Array4<C64>>) -> ModelResult<Self> {
        let n = sites.len();
        if n == 0 {
            return Err(ModelError::InvalidSpec("empty operator".into()));
        }
        let d = sites[0].dim().1;
        if sites[0].dim().0 != 1 || sites[n - 1].dim().3 != 1 {
            return Err(ModelError::InvalidSpec("boundary bonds must be 1".into()));
        }
        for w in sites.windows(2) {
            if w[0].dim().3 != w[1].dim().0 {
                return Err(ModelError::InvalidSpec("bond mismatch".into()));
            }
        }
        if sites.iter().any(|w| w.dim().1 != d || w.dim().2 != d) {
            return Err(ModelError::InvalidSpec("physical dimension mismatch".into()));
        }
        Ok(Self { sites, d })
    }

    /// `Π` of identities: the operator `1`.
    pub fn identity(n: usize, d: usize) -> Self {
        let mut w = Array4::<C64>::zeros((1, d, d, 1));
        for s in 0..d {
            w[[0, s, s, 0]] = C64::new(1.0, 0.0);
        }
        Self {
            sites: vec![w; n],
            d,
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn phys_dim(&self) -> usize {
        self.d
    }

    pub fn site(&self, i: usize) -> &Array4<C64> {
        &self.sites[i]
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.len() - 1].iter().map(|w| w.dim().3).collect()
    }

    /// Full `d^N × d^N` matrix, site 0 most significant.
    pub fn to_dense(&self) -> ModelResult<Array2<C64>> {
        let n = self.len();
        if n > DENSE_MAX_SITES {
            return Err(ModelError::SizeGuard { n, max: DENSE_MAX_SITES });
        }
        let d = self.d;
        // acc[w] is the partial operator on the sites so far, open at right bond w.
        let w0 = &self.sites[0];
        let mut acc: Vec<Array2<C64>> = (0..w0.dim().3)
            .map(|w| w0.slice(ndarray::s![0, .., .., w]).to_owned())
            .collect();
        for w in &self.sites[1..] {
            let (dl, _, _, dr) = w.dim();
            let dim = acc[0].nrows();
            let mut next = vec![Array2::<C64>::zeros((dim * d, dim * d)); dr];
            for (b, out) in next.iter_mut().enumerate() {
                for (a, m) in acc.iter().enumerate().take(dl) {
                    let local = w.slice(ndarray::s![a, .., .., b]);
                    if local.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                        continue;
                    }
                    *out += &kron(&m.view(), &local);
                }
            }
            acc = next;
        }
        Ok(acc.swap_remove(0))
    }
}

pub(crate) fn kron(a: &ndarray::ArrayView2<'_, C64>, b: &ndarray::ArrayView2<'_, C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::<C64>::zeros((ar * br, ac * bc));
    for ((i, j), x) in a.indexed_iter() {
        if *x == C64::new(0.0, 0.0) {
            continue;
        }
        out.slice_mut(ndarray::s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
            .assign(&b.mapv(|y| x * y));
    }
    out
}

/// Lower-triangular operator-sum construction; bond dimension 5 for
/// Heisenberg/XXZ and 3 for transverse Ising.
pub fn build_mpo(spec: &ModelSpec) -> ModelResult<MatrixProductOperator> {
    spec.validate()?;
    let [id, x, y, z] = local_ops(spec.convention);
    let r = |v: f64| C64::new(v, 0.0);
    let bulk: Array4<C64> = match spec.family {
        Family::HeisenbergXxz => {
            let mut w = Array4::<C64>::zeros((5, 2, 2, 5));
            let mut put = |a: usize, b: usize, op: Array2<C64>| {
                w.slice_mut(ndarray::s![a, .., .., b]).assign(&op);
            };
            put(0, 0, id.clone());
            put(1, 0, x.clone());
            put(2, 0, y.clone());
            put(3, 0, z.clone());
            put(4, 0, z.mapv(|v| v * r(-spec.h)));
            put(4, 1, x.mapv(|v| v * r(spec.jx)));
            put(4, 2, y.mapv(|v| v * r(spec.jy)));
            put(4, 3, z.mapv(|v| v * r(spec.jz)));
            put(4, 4, id);
            w
        }
        Family::TransverseIsing => {
            let mut w = Array4::<C64>::zeros((3, 2, 2, 3));
            let mut put = |a: usize, b: usize, op: Array2<C64>| {
                w.slice_mut(ndarray::s![a, .., .., b]).assign(&op);
            };
            put(0, 0, id.clone());
            put(1, 0, z.clone());
            put(2, 0, x.mapv(|v| v * r(-spec.h)));
            put(2, 1, z.mapv(|v| v * r(-spec.jz)));
            put(2, 2, id);
            w
        }
    };
    let dw = bulk.dim().0;
    let n = spec.n;
    let mut sites = Vec::with_capacity(n);
    for i in 0..n {
        let rows = if i == 0 { dw - 1..dw } else { 0..dw };
        let cols = if i == n - 1 { 0..1 } else { 0..dw };
        sites.push(bulk.slice(ndarray::s![rows, .., .., cols]).to_owned());
    }
    MatrixProductOperator::new(sites)
}
