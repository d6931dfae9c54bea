use ndarray::{Array, Array2, Array3, Array4, Dimension, IntoDimension, IxDyn};

use super::{DmrgError, DmrgResult};
use crate::linalg::C64;
use crate::models::MatrixProductOperator;
use crate::mps::{MatrixProductState, SiteTensor};

/// Reorders the axes of `a` and returns a row-major `(rows, cols)` matrix.
fn matricize<D: Dimension>(a: Array<C64, D>, axes: &[usize], rows: usize, cols: usize) -> Array2<C64> {
    let a = a.into_dyn().permuted_axes(IxDyn(axes));
    let a = a.as_standard_layout().into_owned();
    a.into_shape_with_order((rows, cols))
        .expect("element count preserved by permutation")
}

fn reshape<Sh: IntoDimension>(a: Array2<C64>, shape: Sh) -> Array<C64, Sh::Dim> {
    a.into_shape_with_order(shape).expect("element count preserved by reshape")
}

/// Extends a left block `(bra, w, ket)` through one site.
pub(crate) fn extend_left(l: &Array3<C64>, w: &Array4<C64>, a: &Array3<C64>) -> Array3<C64> {
    let (ab, wl, ak) = l.dim();
    let (_, d, ar) = a.dim();
    let wr = w.dim().3;
    // T1[a, w, t, b'] = Σ_b L[a, w, b] A[b, t, b']
    let lm = l.view().into_shape_with_order((ab * wl, ak)).expect("standard layout");
    let am = a.view().into_shape_with_order((ak, d * ar)).expect("standard layout");
    let t1 = reshape(lm.dot(&am), (ab, wl, d, ar));
    // T2[a, b', s, w'] = Σ_{w,t} T1[a, w, t, b'] W[w, s, t, w']
    let t1m = matricize(t1, &[0, 3, 1, 2], ab * ar, wl * d);
    let wm = matricize(w.clone(), &[0, 2, 1, 3], wl * d, d * wr);
    let t2 = reshape(t1m.dot(&wm), (ab, ar, d, wr));
    // L'[a', w', b'] = Σ_{a,s} conj(A[a, s, a']) T2[a, b', s, w']
    let t2m = matricize(t2, &[0, 2, 1, 3], ab * d, ar * wr);
    let ac = a.mapv(|z| z.conj()).into_shape_with_order((ab * d, ar)).expect("standard layout");
    let out = ac.t().dot(&t2m);
    let out = reshape(out, (ar, ar, wr));
    out.permuted_axes([0, 2, 1]).as_standard_layout().into_owned()
}

/// Extends a right block `(bra, w, ket)` through one site.
pub(crate) fn extend_right(r: &Array3<C64>, w: &Array4<C64>, b: &Array3<C64>) -> Array3<C64> {
    let (rb, wr, rk) = r.dim();
    let (bl, d, _) = b.dim();
    let wl = w.dim().0;
    // T1[b, t, a', w'] = Σ_b' B[b, t, b'] R[a', w', b']
    let bm = b.view().into_shape_with_order((bl * d, rk)).expect("standard layout");
    let rm = matricize(r.clone(), &[2, 0, 1], rk, rb * wr);
    let t1 = reshape(bm.dot(&rm), (bl, d, rb, wr));
    // T2[b, a', w, s] = Σ_{t,w'} T1[b, t, a', w'] W[w, s, t, w']
    let t1m = matricize(t1, &[0, 2, 1, 3], bl * rb, d * wr);
    let wm = matricize(w.clone(), &[2, 3, 0, 1], d * wr, wl * d);
    let t2 = reshape(t1m.dot(&wm), (bl, rb, wl, d));
    // R'[a, w, b] = Σ_{s,a'} conj(B[a, s, a']) T2[b, a', w, s]
    let t2m = matricize(t2, &[3, 1, 0, 2], d * rb, bl * wl);
    let bc = b.mapv(|z| z.conj()).into_shape_with_order((bl, d * rb)).expect("standard layout");
    let out = reshape(bc.dot(&t2m), (bl, bl, wl));
    out.permuted_axes([0, 2, 1]).as_standard_layout().into_owned()
}

/// `H_eff·θ` for a two-site tensor `θ[a, s₁, s₂, c]` stored row-major.
pub(crate) struct EffectiveHamiltonian<'a> {
    left: &'a Array3<C64>,
    right: &'a Array3<C64>,
    /// `W₁` as `(w·s₁, s₁'·u)`.
    w1: Array2<C64>,
    /// `W₂` as `(u·s₂, s₂'·w₂)`.
    w2: Array2<C64>,
    dims: (usize, usize, usize, usize, usize),
}

impl<'a> EffectiveHamiltonian<'a> {
    pub(crate) fn new(
        left: &'a Array3<C64>,
        w1: &Array4<C64>,
        w2: &Array4<C64>,
        right: &'a Array3<C64>,
    ) -> Self {
        let (wl, d, _, u) = w1.dim();
        let wr = w2.dim().3;
        let chi_l = left.dim().2;
        let chi_r = right.dim().2;
        Self {
            left,
            right,
            w1: matricize(w1.clone(), &[0, 2, 1, 3], wl * d, d * u),
            w2: matricize(w2.clone(), &[0, 2, 1, 3], u * d, d * wr),
            dims: (chi_l, d, chi_r, wl, wr),
        }
    }

    pub(crate) fn dim(&self) -> usize {
        let (l, d, r, _, _) = self.dims;
        l * d * d * r
    }

    pub(crate) fn apply(&self, theta: &[C64], out: &mut [C64]) {
        let (al, d, cr, wl, wr) = self.dims;
        let u = self.w1.dim().1 / d;
        let theta = ndarray::ArrayView2::from_shape((al, d * d * cr), theta).expect("θ length");
        // T1[a', w, s₁, s₂, c]
        let lm = self.left.view().into_shape_with_order((al * wl, al)).expect("standard layout");
        let t1 = lm.dot(&theta);
        let t1 = reshape(t1, IxDyn(&[al, wl, d, d, cr]));
        // T2[a', s₂, c, s₁', u]
        let t1m = matricize(t1, &[0, 3, 4, 1, 2], al * d * cr, wl * d);
        let t2 = reshape(t1m.dot(&self.w1), IxDyn(&[al, d, cr, d, u]));
        // T3[a', c, s₁', s₂', w₂]
        let t2m = matricize(t2, &[0, 2, 3, 4, 1], al * cr * d, u * d);
        let t3 = reshape(t2m.dot(&self.w2), IxDyn(&[al, cr, d, d, wr]));
        // out[a', s₁', s₂', c']
        let t3m = matricize(t3, &[0, 2, 3, 4, 1], al * d * d, wr * cr);
        let rm = matricize(self.right.clone(), &[1, 2, 0], wr * cr, cr);
        let res = t3m.dot(&rm);
        for (o, v) in out.iter_mut().zip(res.iter()) {
            *o = *v;
        }
    }
}

fn trivial_block() -> Array3<C64> {
    Array3::from_elem((1, 1, 1), C64::new(1.0, 0.0))
}

/// Cached partial contractions of `⟨Ψ|H|Ψ⟩`.
///
/// `left(i)` covers sites `0..i` and `right(i)` covers sites `i..N`; both are
/// indexed `(bra, w, ket)` on bond `i`. A block is cleared whenever a site it
/// depends on changes.
#[derive(Clone, Debug)]
pub struct Environment {
    left: Vec<Option<Array3<C64>>>,
    right: Vec<Option<Array3<C64>>>,
}

impl Environment {
    /// Builds every block for an MPS with center `center`: left blocks up to
    /// `center` and right blocks from `center + 1`.
    pub fn build(mps: &MatrixProductState, mpo: &MatrixProductOperator, center: usize) -> Self {
        let n = mps.len();
        let mut env = Self {
            left: vec![None; n + 1],
            right: vec![None; n + 1],
        };
        env.left[0] = Some(trivial_block());
        env.right[n] = Some(trivial_block());
        for i in 0..center {
            env.update_left(i, mps.site(i), mpo);
        }
        for i in (center + 1..n).rev() {
            env.update_right(i, mps.site(i), mpo);
        }
        env
    }

    /// All blocks recomputed from scratch, regardless of gauge.
    pub fn full(mps: &MatrixProductState, mpo: &MatrixProductOperator) -> Self {
        let n = mps.len();
        let mut left = vec![trivial_block()];
        for i in 0..n {
            left.push(extend_left(&left[i], mpo.site(i), mps.site(i).data()));
        }
        let mut right = vec![trivial_block()];
        for i in (0..n).rev() {
            let next = extend_right(right.last().expect("non-empty"), mpo.site(i), mps.site(i).data());
            right.push(next);
        }
        right.reverse();
        Self {
            left: left.into_iter().map(Some).collect(),
            right: right.into_iter().map(Some).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.left.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn left(&self, i: usize) -> DmrgResult<&Array3<C64>> {
        self.left[i]
            .as_ref()
            .ok_or_else(|| DmrgError::InternalConsistency(format!("left block {i} is stale")))
    }

    pub fn right(&self, i: usize) -> DmrgResult<&Array3<C64>> {
        self.right[i]
            .as_ref()
            .ok_or_else(|| DmrgError::InternalConsistency(format!("right block {i} is stale")))
    }

    /// Recomputes `left(i + 1)` from `left(i)` and the new tensor at site `i`.
    pub(crate) fn update_left(&mut self, i: usize, site: &SiteTensor, mpo: &MatrixProductOperator) {
        let l = self.left[i].as_ref().expect("left block available");
        let next = extend_left(l, mpo.site(i), site.data());
        self.invalidate_site(i);
        self.left[i + 1] = Some(next);
    }

    /// Recomputes `right(i)` from `right(i + 1)` and the new tensor at site `i`.
    pub(crate) fn update_right(&mut self, i: usize, site: &SiteTensor, mpo: &MatrixProductOperator) {
        let r = self.right[i + 1].as_ref().expect("right block available");
        let next = extend_right(r, mpo.site(i), site.data());
        self.invalidate_site(i);
        self.right[i] = Some(next);
    }

    /// Clears the blocks that contain site `i`.
    pub(crate) fn invalidate_site(&mut self, i: usize) {
        for b in &mut self.left[i + 1..] {
            *b = None;
        }
        for b in &mut self.right[..=i] {
            *b = None;
        }
    }

    /// Largest entrywise difference over blocks cached in both environments.
    pub fn max_deviation(&self, other: &Self) -> f64 {
        let diff = |a: &Option<Array3<C64>>, b: &Option<Array3<C64>>| match (a, b) {
            (Some(a), Some(b)) if a.dim() == b.dim() => a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| (x - y).norm())
                .fold(0.0, f64::max),
            (Some(_), Some(_)) => f64::INFINITY,
            _ => 0.0,
        };
        let l = self.left.iter().zip(&other.left).map(|(a, b)| diff(a, b));
        let r = self.right.iter().zip(&other.right).map(|(a, b)| diff(a, b));
        l.chain(r).fold(0.0, f64::max)
    }

    /// Number of cached blocks.
    pub fn cached(&self) -> usize {
        self.left.iter().chain(&self.right).filter(|b| b.is_some()).count()
    }
}

/// `⟨Ψ|H|Ψ⟩` by a single left-to-right contraction.
pub(crate) fn contract_expectation(mps: &MatrixProductState, mpo: &MatrixProductOperator) -> C64 {
    let mut l = trivial_block();
    for i in 0..mps.len() {
        l = extend_left(&l, mpo.site(i), mps.site(i).data());
    }
    l[[0, 0, 0]]
}
