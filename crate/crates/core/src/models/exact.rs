use ndarray::Array2;
use ndarray_linalg::SVD;

use super::{kron, local_ops, Convention, Family, ModelError, ModelResult, ModelSpec};
use crate::linalg::{eigh_dense, eigs_lowest, eigvalsh_real, EigOptions, C64};

/// Largest chain for which a full dense matrix is built.
pub const DENSE_MAX_SITES: usize = 12;
/// Largest chain diagonalized sector by sector.
pub const SECTOR_MAX_SITES: usize = 14;
/// Full dense diagonalization limit when no symmetry is available.
const DENSE_DIAG_MAX_SITES: usize = 10;

/// `H` assembled term by term from Kronecker products of local operators.
pub fn dense_term_sum(spec: &ModelSpec) -> ModelResult<Array2<C64>> {
    spec.validate()?;
    let n = spec.n;
    if n > DENSE_MAX_SITES {
        return Err(ModelError::SizeGuard { n, max: DENSE_MAX_SITES });
    }
    let [_, x, y, z] = local_ops(spec.convention);
    let dim = 1usize << n;
    let mut h = Array2::<C64>::zeros((dim, dim));
    let (bonds, fields): (Vec<(f64, &Array2<C64>)>, (f64, &Array2<C64>)) = match spec.family {
        Family::HeisenbergXxz => (vec![(spec.jx, &x), (spec.jy, &y), (spec.jz, &z)], (-spec.h, &z)),
        Family::TransverseIsing => (vec![(-spec.jz, &z)], (-spec.h, &x)),
    };
    for i in 0..n - 1 {
        for &(coef, op) in &bonds {
            if coef != 0.0 {
                add_local(&mut h, n, i, &kron(&op.view(), &op.view()), coef);
            }
        }
    }
    let (coef, op) = fields;
    if coef != 0.0 {
        for i in 0..n {
            add_local(&mut h, n, i, op, coef);
        }
    }
    Ok(h)
}

/// `h += coef · (1 ⊗ op ⊗ 1)` with `op` acting on the `k` sites starting at
/// `site` (`op` is `2ᵏ × 2ᵏ`).
fn add_local(h: &mut Array2<C64>, n: usize, site: usize, op: &Array2<C64>, coef: f64) {
    let k = op.nrows().trailing_zeros() as usize;
    let shift = n - site - k;
    let mask = ((1usize << k) - 1) << shift;
    for col in 0..1usize << n {
        let c_loc = (col & mask) >> shift;
        let rest = col & !mask;
        for r_loc in 0..1usize << k {
            let v = op[[r_loc, c_loc]];
            if v != C64::new(0.0, 0.0) {
                h[[rest | (r_loc << shift), col]] += v * coef;
            }
        }
    }
}

/// Ground-state energy without reference to any MPS machinery.
///
/// Transverse Ising goes through its free-fermion solution (any `n`).
/// Sᶻ-conserving chains are diagonalized densely in every magnetization
/// sector up to [`SECTOR_MAX_SITES`]; anything else falls back to a full
/// dense diagonalization for small chains.
pub fn exact_ground_energy(spec: &ModelSpec) -> ModelResult<f64> {
    spec.validate()?;
    match spec.family {
        Family::TransverseIsing => Ok(tfim_free_fermion_energy(spec.n, spec.jz, spec.h, spec.convention)),
        Family::HeisenbergXxz if spec.conserves_sz() => {
            if spec.n > SECTOR_MAX_SITES {
                return Err(ModelError::SizeGuard {
                    n: spec.n,
                    max: SECTOR_MAX_SITES,
                });
            }
            let mut best = f64::INFINITY;
            for k in 0..=spec.n {
                let block = sector_matrix(spec, k).to_dense();
                let vals = eigvalsh_real(&block).map_err(|e| ModelError::Numerical(e.to_string()))?;
                best = best.min(vals[0]);
            }
            Ok(best)
        }
        Family::HeisenbergXxz => {
            if spec.n > DENSE_DIAG_MAX_SITES {
                return Err(ModelError::SizeGuard {
                    n: spec.n,
                    max: DENSE_DIAG_MAX_SITES,
                });
            }
            let h = dense_term_sum(spec)?;
            let (vals, _) = eigh_dense(&h).map_err(|e| ModelError::Numerical(e.to_string()))?;
            Ok(vals[0])
        }
    }
}

/// Lowest energy in the `Sᶻ = 0` (or `±½`) sector of an Sᶻ-conserving chain,
/// via a sparse sector matrix and Lanczos. Meant for chains too long for
/// dense methods; the antiferromagnetic ground state lives in this sector.
pub fn exact_ground_energy_sparse(spec: &ModelSpec, tol: f64) -> ModelResult<f64> {
    spec.validate()?;
    if !spec.conserves_sz() {
        return Err(ModelError::UnsupportedModel(
            "sparse path needs a conserved Sᶻ".into(),
        ));
    }
    if spec.n > 24 {
        return Err(ModelError::SizeGuard { n: spec.n, max: 24 });
    }
    let m = sector_matrix(spec, spec.n / 2);
    let dim = m.dim();
    let v0: Vec<C64> = (0..dim)
        .map(|i| C64::new(1.0 + 0.1 * ((i * 7919) % 113) as f64 / 113.0, 0.0))
        .collect();
    let opts = EigOptions {
        tol,
        max_iter: 20_000,
        krylov_dim: 60,
    };
    let r = eigs_lowest(|v, out| m.apply(v, out), dim, &v0, &opts)
        .map_err(|e| ModelError::Numerical(e.to_string()))?;
    Ok(r.value)
}

/// Real symmetric matrix of an Sᶻ-conserving chain restricted to states with
/// `k` down spins, in compressed-row form.
struct SectorMatrix {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SectorMatrix {
    fn dim(&self) -> usize {
        self.row_start.len() - 1
    }

    fn apply(&self, v: &[C64], out: &mut [C64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for p in self.row_start[r]..self.row_start[r + 1] {
                acc += v[self.cols[p]] * self.vals[p];
            }
            *o = acc;
        }
    }

    fn to_dense(&self) -> Array2<f64> {
        let n = self.dim();
        let mut m = Array2::<f64>::zeros((n, n));
        for r in 0..n {
            for p in self.row_start[r]..self.row_start[r + 1] {
                m[[r, self.cols[p]]] += self.vals[p];
            }
        }
        m
    }
}

fn sector_matrix(spec: &ModelSpec, k: usize) -> SectorMatrix {
    let n = spec.n;
    let c = spec.convention.scale();
    let states: Vec<u64> = (0..1u64 << n).filter(|s| s.count_ones() as usize == k).collect();
    let bit = |s: u64, site: usize| (s >> (n - 1 - site)) & 1;
    let sz = |b: u64| if b == 0 { c } else { -c };
    let flip = (spec.jx + spec.jy) * c * c;

    let mut row_start = Vec::with_capacity(states.len() + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_start.push(0);
    for (r, &s) in states.iter().enumerate() {
        let mut diag = 0.0;
        for i in 0..n {
            diag -= spec.h * sz(bit(s, i));
        }
        for i in 0..n - 1 {
            let (a, b) = (bit(s, i), bit(s, i + 1));
            diag += spec.jz * sz(a) * sz(b);
            if a != b && flip != 0.0 {
                let mask = (1u64 << (n - 1 - i)) | (1u64 << (n - 2 - i));
                let t = s ^ mask;
                let col = states.binary_search(&t).expect("flip stays in sector");
                cols.push(col);
                vals.push(flip);
            }
        }
        cols.push(r);
        vals.push(diag);
        row_start.push(cols.len());
    }
    SectorMatrix { row_start, cols, vals }
}

/// Ground-state energy of `−j Σ ZZ − h Σ X` (operators scaled by the
/// convention) on an open chain: minus the sum of the singular values of the
/// bidiagonal single-particle matrix.
pub fn tfim_free_fermion_energy(n: usize, j: f64, h: f64, convention: Convention) -> f64 {
    let c = convention.scale();
    let (j, h) = (j * c * c, h * c);
    let mut b = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        b[[i, i]] = h;
        if i + 1 < n {
            b[[i, i + 1]] = j;
        }
    }
    let (_, s, _) = b.svd(false, false).expect("bidiagonal SVD");
    -s.sum()
}

/// Thermodynamic-limit energy per site of the spin-½ Heisenberg chain,
/// `1/4 − ln 2`.
pub fn bethe_reference() -> f64 {
    0.25 - std::f64::consts::LN_2
}

/// [`bethe_reference`] with Pauli operators (factor 4).
pub fn bethe_reference_pauli() -> f64 {
    4.0 * bethe_reference()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::build_mpo;

    /// All models here are real in the computational basis.
    fn dense_ground(spec: &ModelSpec) -> f64 {
        let h = dense_term_sum(spec).unwrap();
        assert!(h.iter().all(|z| z.im.abs() < 1e-14));
        eigvalsh_real(&h.mapv(|z| z.re)).unwrap()[0]
    }

    #[test]
    fn two_site_values() {
        let spec = ModelSpec::heisenberg(2, Convention::SpinHalf);
        assert!((exact_ground_energy(&spec).unwrap() + 0.75).abs() < 1e-14);
        assert!((dense_ground(&spec) + 0.75).abs() < 1e-14);
    }

    #[test]
    fn sectors_match_full_dense() {
        for n in 2..=8 {
            for spec in [
                ModelSpec::heisenberg(n, Convention::SpinHalf),
                ModelSpec::xxz(n, 1.5, Convention::Pauli),
                ModelSpec { h: 0.3, ..ModelSpec::xxz(n, 0.7, Convention::Pauli) },
            ] {
                let a = exact_ground_energy(&spec).unwrap();
                let b = dense_ground(&spec);
                assert!((a - b).abs() < 1e-10, "{spec:?}: {a} vs {b}");
            }
        }
    }

    fn check_free_fermions(n: usize, h: f64, conv: Convention) {
        let spec = ModelSpec::tfim(n, 1.0, h, conv);
        let ff = exact_ground_energy(&spec).unwrap();
        let dense = dense_ground(&spec);
        assert!((ff - dense).abs() <= 1e-9, "n={n} h={h}: {ff} vs {dense}");
    }

    #[test]
    fn free_fermions_match_dense() {
        for n in 2..=8 {
            for h in [0.2, 1.0, 1.7] {
                for conv in [Convention::Pauli, Convention::SpinHalf] {
                    check_free_fermions(n, h, conv);
                }
            }
        }
        check_free_fermions(10, 1.0, Convention::Pauli);
    }

    #[test]
    #[ignore = "extended oracle tier"]
    fn free_fermions_match_dense_large() {
        for n in [11, 12] {
            for h in [0.2, 1.0] {
                check_free_fermions(n, h, Convention::Pauli);
            }
        }
    }

    #[test]
    fn free_fermion_limits() {
        assert!((tfim_free_fermion_energy(1, 1.0, 0.8, Convention::Pauli) + 0.8).abs() < 1e-15);
        assert!((tfim_free_fermion_energy(7, 1.3, 0.0, Convention::Pauli) + 6.0 * 1.3).abs() < 1e-12);
    }

    #[test]
    fn critical_ising_closed_form() {
        // Open critical chain: E₀ = 1 − 1/sin(π/(2(2N+1))).
        for n in [5usize, 20, 64] {
            let closed = 1.0 - 1.0 / (std::f64::consts::PI / (2.0 * (2 * n + 1) as f64)).sin();
            let ff = tfim_free_fermion_energy(n, 1.0, 1.0, Convention::Pauli);
            assert!((ff - closed).abs() < 1e-10 * closed.abs());
        }
        let e20 = tfim_free_fermion_energy(20, 1.0, 1.0, Convention::Pauli) / 20.0;
        assert!((e20 + 1.25539).abs() < 1e-4);
    }

    #[test]
    fn pauli_is_four_times_spin() {
        for n in 2..=8 {
            let s = exact_ground_energy(&ModelSpec::xxz(n, 1.5, Convention::SpinHalf)).unwrap();
            let p = exact_ground_energy(&ModelSpec::xxz(n, 1.5, Convention::Pauli)).unwrap();
            assert!((p - 4.0 * s).abs() < 1e-10);
        }
    }

    #[test]
    fn bethe_values() {
        assert!((bethe_reference() + 0.443147).abs() < 1e-6);
        assert!((bethe_reference_pauli() + 1.772589).abs() < 1e-6);
        assert_eq!(bethe_reference().to_bits(), bethe_reference().to_bits());
    }

    #[test]
    fn sparse_sector_matches_dense() {
        let spec = ModelSpec::heisenberg(10, Convention::Pauli);
        let a = exact_ground_energy(&spec).unwrap();
        let b = exact_ground_energy_sparse(&spec, 1e-12).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn size_guards() {
        let spec = ModelSpec::heisenberg(15, Convention::Pauli);
        assert!(matches!(exact_ground_energy(&spec), Err(ModelError::SizeGuard { .. })));
        assert!(matches!(dense_term_sum(&spec), Err(ModelError::SizeGuard { .. })));
        let mpo = build_mpo(&spec).unwrap();
        assert!(mpo.to_dense().is_err());
    }

    /// Reference energies for 20-site chains, using the sparse sector solver.
    #[test]
    #[ignore = "extended oracle tier"]
    fn twenty_site_heisenberg() {
        let e = exact_ground_energy_sparse(&ModelSpec::heisenberg(20, Convention::Pauli), 1e-10).unwrap();
        assert!((e / 20.0 + 1.7365).abs() < 1e-4, "{}", e / 20.0);
    }
}
