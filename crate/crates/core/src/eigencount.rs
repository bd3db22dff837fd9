//! Eigenvalue counting by factorization inertia, with a dense oracle.
//!
//! `H − E·Id` is factored as `L D Lᵀ` in band storage (grid operators in
//! lexicographic order have half-bandwidth `n^(d-1)`, which the elimination
//! never exceeds). By Sylvester's law of inertia the signs of the pivots in
//! `D` give the number of eigenvalues below, at and above `E`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::{CsrMatrix, DirichletOperator, SymmetricOperator};

pub const DEFAULT_ORACLE_CAP: usize = 4096;

/// Relative zero-pivot tolerance; multiplied by the operator's ∞-norm.
pub const ZERO_TOL_REL: f64 = 1e-10;

/// Maximum number of perturbed-energy retries after a breakdown.
pub const MAX_RETRIES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InertiaResult {
    pub n_neg: usize,
    pub n_zero: usize,
    pub n_pos: usize,
    pub zero_tol: f64,
}

impl InertiaResult {
    pub fn dim(&self) -> usize {
        self.n_neg + self.n_zero + self.n_pos
    }
}

/// Number of eigenvalues `≤ E`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Count {
    pub count: usize,
    /// Set when a pivot fell within the zero tolerance or the counts on both
    /// sides of a breakdown disagree: an eigenvalue sits (numerically) at `E`.
    pub coincident: bool,
    /// Energy at which the reported factorization ran.
    pub energy: f64,
}

pub fn default_zero_tol(m: &CsrMatrix) -> f64 {
    ZERO_TOL_REL * m.inf_norm().max(f64::MIN_POSITIVE)
}

/// Upper band of a symmetric matrix: row `i` stores `a[i][i..=i+bw]`.
struct Band {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl Band {
    fn shifted(m: &CsrMatrix, shift: f64) -> Self {
        let n = m.dim();
        let bw = m.half_bandwidth();
        let w = bw + 1;
        let mut data = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in m.row(i) {
                if j >= i {
                    data[i * w + (j - i)] = v;
                }
            }
            data[i * w] -= shift;
        }
        Self { n, bw, data }
    }

    /// In-place `L D Lᵀ` without pivoting. Returns the pivot signs classified
    /// with `zero_tol`, or the index of a pivot too small to divide by.
    fn inertia(&mut self, zero_tol: f64, breakdown_tol: f64) -> std::result::Result<(usize, usize, usize), usize> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let (mut neg, mut zero, mut pos) = (0, 0, 0);
        let mut pivot_row = vec![0.0; w];
        for k in 0..n {
            let p = self.data[k * w];
            if !p.is_finite() || p.abs() <= breakdown_tol {
                return Err(k);
            }
            if p.abs() <= zero_tol {
                zero += 1;
            } else if p < 0.0 {
                neg += 1;
            } else {
                pos += 1;
            }
            let reach = bw.min(n - 1 - k);
            pivot_row[..=reach].copy_from_slice(&self.data[k * w..k * w + reach + 1]);
            for i in 1..=reach {
                let a_ki = pivot_row[i];
                if a_ki == 0.0 {
                    continue;
                }
                let f = a_ki / p;
                let base = (k + i) * w;
                let target = &mut self.data[base..base + (reach - i) + 1];
                for (t, a_kj) in target.iter_mut().zip(&pivot_row[i..=reach]) {
                    *t -= f * a_kj;
                }
            }
        }
        Ok((neg, zero, pos))
    }
}

/// Inertia of `op − E·Id`.
///
/// A pivot smaller than machine precision relative to the operator norm is a
/// breakdown and is reported with its index; pivots within `zero_tol` are
/// counted in `n_zero`.
pub fn inertia<O: SymmetricOperator + ?Sized>(op: &O, energy: f64, zero_tol: f64) -> Result<InertiaResult> {
    if !energy.is_finite() {
        return Err(Error::NonFiniteEnergy(energy));
    }
    let m = op.matrix();
    let breakdown_tol = f64::EPSILON * m.inf_norm().max(energy.abs()).max(f64::MIN_POSITIVE);
    let mut band = Band::shifted(m, energy);
    match band.inertia(zero_tol, breakdown_tol) {
        Ok((n_neg, n_zero, n_pos)) => Ok(InertiaResult { n_neg, n_zero, n_pos, zero_tol }),
        Err(pivot_index) => Err(Error::FactorizationBreakdown { pivot_index, energy }),
    }
}

/// `#{eigenvalues ≤ E ± δ}`, moving further out on breakdown.
fn count_sided<O: SymmetricOperator + ?Sized>(op: &O, energy: f64, step: f64, zero_tol: f64) -> Result<(usize, f64)> {
    let mut e = energy;
    let mut last_err = None;
    for _ in 0..MAX_RETRIES {
        e += step;
        match inertia(op, e, zero_tol) {
            Ok(r) => return Ok((r.n_neg + r.n_zero, e)),
            Err(err @ Error::FactorizationBreakdown { .. }) => last_err = Some(err),
            Err(err) => return Err(err),
        }
    }
    Err(last_err.expect("at least one retry"))
}

/// `#{eigenvalues ≤ E}`.
///
/// Without pivoting a tiny or vanishing pivot can come from a singular
/// leading minor as well as from an eigenvalue at `E`. Either way the count
/// is resolved from both sides at `E ± zero_tol` (moving further out, at
/// most [`MAX_RETRIES`] times, if those break down too). Equal counts mean
/// no eigenvalue in the window; otherwise the upper count is returned,
/// flagged as coincident.
pub fn count_leq<O: SymmetricOperator + ?Sized>(op: &O, energy: f64) -> Result<Count> {
    let zero_tol = default_zero_tol(op.matrix());
    match inertia(op, energy, zero_tol) {
        Ok(r) if r.n_zero == 0 => Ok(Count { count: r.n_neg, coincident: false, energy }),
        Ok(_) | Err(Error::FactorizationBreakdown { .. }) => {
            let (up, e_up) = count_sided(op, energy, zero_tol, zero_tol)?;
            let (down, _) = count_sided(op, energy, -zero_tol, zero_tol)?;
            Ok(Count { count: up, coincident: up != down, energy: e_up })
        }
        Err(err) => Err(err),
    }
}

/// All eigenvalues, ascending, from a dense symmetric eigensolve.
pub fn dense_spectrum<O: SymmetricOperator + ?Sized>(op: &O, cap: usize) -> Result<Vec<f64>> {
    let m = op.matrix();
    let n = m.dim();
    if n > cap {
        return Err(Error::OracleCapExceeded { dim: n, cap });
    }
    let mut dense = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, v) in m.row(i) {
            dense[(i, j)] = v;
        }
    }
    let mut eig: Vec<f64> = dense.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// `#{λ ≤ E}` in a sorted spectrum.
pub fn spectrum_count(sorted: &[f64], energy: f64) -> usize {
    sorted.partition_point(|&l| l <= energy)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelativeCount {
    pub value: i64,
    pub coincident: bool,
}

/// `ξ_L(E) = N₀(E) − N₁(E)` for `op1 = op0 + V` on a shared grid.
pub fn relative_count(op1: &DirichletOperator, op0: &DirichletOperator, energy: f64) -> Result<RelativeCount> {
    if !op1.grid.same_as(&op0.grid) {
        return Err(Error::GridMismatch);
    }
    let c0 = count_leq(op0, energy)?;
    let c1 = count_leq(op1, energy)?;
    Ok(RelativeCount { value: c0.count as i64 - c1.count as i64, coincident: c0.coincident || c1.coincident })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{assemble_operator, build_grid, PotentialField};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn free_1d(n: usize, h: f64) -> DirichletOperator {
        let g = build_grid(1, (n + 1) as f64 * h, h).unwrap();
        assemble_operator(&g, None, None).unwrap()
    }

    fn closed_form_1d(n: usize, h: f64) -> Vec<f64> {
        (1..=n).map(|k| (1.0 - (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos()) / (h * h)).collect()
    }

    #[test]
    fn three_point_counts() {
        let op = free_1d(3, 1.0);
        assert_eq!(count_leq(&op, 0.5).unwrap().count, 1);
        let c = count_leq(&op, 1.0).unwrap();
        assert_eq!(c.count, 2);
        assert!(c.coincident);
        assert_eq!(count_leq(&op, -1.0).unwrap().count, 0);
        let (_, hi) = op.matrix.gershgorin();
        assert_eq!(count_leq(&op, hi + 0.1).unwrap().count, 3);
    }

    #[test]
    fn exact_singularity_is_a_breakdown() {
        let op = free_1d(3, 1.0);
        let zt = default_zero_tol(&op.matrix);
        assert!(matches!(inertia(&op, 1.0, zt), Err(Error::FactorizationBreakdown { pivot_index: 0, .. })));
        let r = inertia(&op, 0.4, zt).unwrap();
        assert_eq!((r.n_neg, r.n_zero, r.n_pos), (1, 0, 2));
        // singular leading minor at E = 1/2, which is not an eigenvalue
        assert!(matches!(inertia(&op, 0.5, zt), Err(Error::FactorizationBreakdown { pivot_index: 1, .. })));
        let c = count_leq(&op, 0.5).unwrap();
        assert_eq!(c.count, 1);
        assert!(!c.coincident);
        assert!(matches!(inertia(&op, f64::NAN, zt), Err(Error::NonFiniteEnergy(_))));
    }

    #[test]
    fn dense_matches_closed_form() {
        let op = free_1d(3, 1.0);
        let s = dense_spectrum(&op, DEFAULT_ORACLE_CAP).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        for (a, b) in s.iter().zip([1.0 - r, 1.0, 1.0 + r]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(matches!(dense_spectrum(&op, 2), Err(Error::OracleCapExceeded { dim: 3, cap: 2 })));
    }

    #[test]
    fn dense_2d_is_tensor_sum() {
        let n = 5;
        let h = 0.5;
        let g = build_grid(2, (n + 1) as f64 * h, h).unwrap();
        let op = assemble_operator(&g, None, None).unwrap();
        let one = closed_form_1d(n, h);
        let mut expected: Vec<f64> = one.iter().flat_map(|a| one.iter().map(move |b| a + b)).collect();
        expected.sort_by(f64::total_cmp);
        let s = dense_spectrum(&op, DEFAULT_ORACLE_CAP).unwrap();
        for (a, b) in s.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_shift_moves_spectrum() {
        let g = build_grid(2, 3.0, 0.5).unwrap();
        let op0 = assemble_operator(&g, None, None).unwrap();
        let op1 = assemble_operator(&g, Some(&PotentialField::constant(2, 0.75)), None).unwrap();
        let s0 = dense_spectrum(&op0, DEFAULT_ORACLE_CAP).unwrap();
        let s1 = dense_spectrum(&op1, DEFAULT_ORACLE_CAP).unwrap();
        for (a, b) in s0.iter().zip(&s1) {
            assert!((b - a - 0.75).abs() < 1e-10);
        }
    }

    #[test]
    fn random_sparse_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, rng.random_range(-2.0..2.0)));
            for _ in 0..2 {
                let j = rng.random_range(0..n);
                if j != i {
                    let v = rng.random_range(-1.0..1.0);
                    trip.push((i, j, v));
                    trip.push((j, i, v));
                }
            }
        }
        let m = CsrMatrix::from_triplets(n, trip);
        assert!(m.is_symmetric());
        let s = dense_spectrum(&m, DEFAULT_ORACLE_CAP).unwrap();
        let zt = default_zero_tol(&m);
        let (lo, hi) = m.gershgorin();
        for _ in 0..100 {
            let e = rng.random_range(lo..hi);
            if s.iter().any(|l| (l - e).abs() <= zt) {
                continue;
            }
            assert_eq!(count_leq(&m, e).unwrap().count, spectrum_count(&s, e), "E={e}");
        }
    }

    #[test]
    fn relative_count_checks_grids() {
        let a = free_1d(3, 1.0);
        let b = free_1d(4, 1.0);
        assert_eq!(relative_count(&a, &b, 0.5), Err(Error::GridMismatch));
        assert_eq!(relative_count(&a, &a, 0.5).unwrap().value, 0);
    }

    #[test]
    fn relative_count_matches_dense_oracle() {
        let g = build_grid(1, 20.0, 0.25).unwrap();
        let v = PotentialField::box_indicator(1, 5.0, 1.0);
        let op0 = assemble_operator(&g, None, None).unwrap();
        let op1 = assemble_operator(&g, None, Some(&v)).unwrap();
        let s0 = dense_spectrum(&op0, DEFAULT_ORACLE_CAP).unwrap();
        let s1 = dense_spectrum(&op1, DEFAULT_ORACLE_CAP).unwrap();
        let oracle = spectrum_count(&s0, 1.0) as i64 - spectrum_count(&s1, 1.0) as i64;
        assert_eq!(relative_count(&op1, &op0, 1.0).unwrap().value, oracle);
    }
}
