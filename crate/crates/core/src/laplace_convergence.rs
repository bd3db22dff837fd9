//! Uniformity diagnostics over families indexed by box size and shift.

use crate::error::{Error, Result};

/// Values `x_n^a` for box sizes `n_values[i]` and finite choice sets.
#[derive(Clone, Debug, PartialEq)]
pub struct IndexedFamily {
    pub n_values: Vec<f64>,
    /// `values[i][c]` is the value at `n_values[i]` for the `c`-th choice.
    pub values: Vec<Vec<f64>>,
}

impl IndexedFamily {
    pub fn new(n_values: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        if n_values.is_empty() || n_values.len() != values.len() {
            return Err(Error::InvalidArgument("family needs one value list per n".into()));
        }
        if n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("n values must be strictly ascending".into()));
        }
        if values.iter().any(|v| v.is_empty()) {
            return Err(Error::InvalidArgument("every n needs at least one choice".into()));
        }
        Ok(Self { n_values, values })
    }
}

/// `(n, max_a |x_n^a − reference|)` for every `n`.
pub fn uniformity_profile(family: &IndexedFamily, reference: f64) -> Vec<(f64, f64)> {
    family
        .n_values
        .iter()
        .zip(&family.values)
        .map(|(n, vals)| (*n, vals.iter().map(|v| (v - reference).abs()).fold(0.0, f64::max)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// Laplace profiles are small and the weighted profile is small too.
    Pass,
    /// Laplace profiles are not below tolerance, so nothing is implied.
    PremiseUnmet,
    /// Laplace profiles are small but the weighted profile is not.
    Flag,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::PremiseUnmet => "premise-unmet",
            Self::Flag => "flag",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyReport {
    /// `(t, profile)` for every Laplace time.
    pub laplace_profiles: Vec<(f64, Vec<(f64, f64)>)>,
    pub weighted_profile: Vec<(f64, f64)>,
    pub verdict: Verdict,
}

/// Forward check: small Laplace-space deviations at the largest `n` for
/// every `t` should come with a small weighted-SSF deviation there.
///
/// `laplace[k]` holds the family at `t_grid[k]`; all families and the
/// weighted one must share the same `n` grid and choice counts.
pub fn laplace_vs_weighted_consistency(
    t_grid: &[f64],
    laplace: &[IndexedFamily],
    weighted: &IndexedFamily,
    reference_laplace: &[f64],
    reference_weighted: f64,
    tol_laplace: f64,
    tol_weighted: f64,
) -> Result<ConsistencyReport> {
    if t_grid.len() != laplace.len() || t_grid.len() != reference_laplace.len() {
        return Err(Error::GridMismatch);
    }
    let shape = |f: &IndexedFamily| (f.n_values.clone(), f.values.iter().map(Vec::len).collect::<Vec<_>>());
    let target = shape(weighted);
    if laplace.iter().any(|f| shape(f) != target) {
        return Err(Error::GridMismatch);
    }
    let laplace_profiles: Vec<(f64, Vec<(f64, f64)>)> =
        t_grid.iter().zip(laplace).zip(reference_laplace).map(|((t, f), r)| (*t, uniformity_profile(f, *r))).collect();
    let weighted_profile = uniformity_profile(weighted, reference_weighted);
    let last = |p: &[(f64, f64)]| p.last().map(|x| x.1).unwrap_or(0.0);
    let premise = laplace_profiles.iter().all(|(_, p)| last(p) <= tol_laplace);
    let verdict = if !premise {
        Verdict::PremiseUnmet
    } else if last(&weighted_profile) <= tol_weighted {
        Verdict::Pass
    } else {
        Verdict::Flag
    };
    Ok(ConsistencyReport { laplace_profiles, weighted_profile, verdict })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClearedInterval {
    pub lo: f64,
    pub hi: f64,
    /// Smaller of the two endpoint distances to the nearest jump.
    pub clearance: f64,
}

/// Moves each end of `[lo, hi]` inward by at most `max_move`, in steps of
/// `cell`, to the first point at least `cells` cells from every jump. If no
/// such point is in reach, the end goes to the reachable point farthest
/// from any jump; `clearance` tells which case happened. `None` if the ends
/// cross.
pub fn clear_endpoints(
    lo: f64,
    hi: f64,
    jumps: &[f64],
    cell: f64,
    cells: usize,
    max_move: f64,
) -> Option<ClearedInterval> {
    let gap = cell * cells as f64;
    let dist = |x: f64| jumps.iter().map(|j| (x - j).abs()).fold(f64::INFINITY, f64::min);
    let steps = (max_move / cell + 1e-9).floor() as usize;
    let pick = |start: f64, dir: f64| {
        let mut best = (start, dist(start));
        for k in 0..=steps {
            let x = start + dir * k as f64 * cell;
            let d = dist(x);
            if d >= gap {
                return (x, d);
            }
            if d > best.1 {
                best = (x, d);
            }
        }
        best
    };
    let (a, da) = pick(lo, 1.0);
    let (b, db) = pick(hi, -1.0);
    (a < b).then_some(ClearedInterval { lo: a, hi: b, clearance: da.min(db) })
}
