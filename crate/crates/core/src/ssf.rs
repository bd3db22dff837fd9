//! The finite-volume spectral shift function `ξ_L = N₀ − N₁` and its averages.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigencount::{dense_spectrum, relative_count};
use crate::error::{Error, Result};
use crate::lattice::DirichletOperator;
use crate::quadrature::adaptive_simpson;

/// Relative tolerance of the per-interval quadrature in exact mode.
pub const QUAD_REL_TOL: f64 = 1e-10;

/// Default number of uniform probe energies on an interval.
pub const DEFAULT_PROBE_POINTS: usize = 400;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CurveMeta {
    pub edge: f64,
    pub mesh: f64,
    pub tag: String,
}

impl CurveMeta {
    pub fn of(op: &DirichletOperator) -> Self {
        Self { edge: op.grid.edge(), mesh: op.grid.mesh(), tag: op.potential_tag.clone() }
    }
}

/// Right-continuous step function: `values[k]` holds on
/// `[breakpoints[k], breakpoints[k+1])`, zero below the first breakpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactCurve {
    pub breakpoints: Vec<f64>,
    pub values: Vec<i64>,
    pub meta: CurveMeta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledCurve {
    pub energies: Vec<f64>,
    pub values: Vec<i64>,
    pub coincident: Vec<bool>,
    pub meta: CurveMeta,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SsfCurve {
    Exact(ExactCurve),
    Sampled(SampledCurve),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Probe {
    Exact,
    Grid(Vec<f64>),
}

/// `count` uniformly spaced energies on `[lo, hi]`, endpoints included.
pub fn uniform_probe(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

impl ExactCurve {
    /// Merges the two spectra: `+1` at each eigenvalue of `H₀`, `−1` at each of `H₁`.
    pub fn from_spectra(spectrum0: &[f64], spectrum1: &[f64], meta: CurveMeta) -> Self {
        let mut events: Vec<(f64, i64)> =
            spectrum0.iter().map(|&e| (e, 1)).chain(spectrum1.iter().map(|&e| (e, -1))).collect();
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut breakpoints = Vec::new();
        let mut values = Vec::new();
        let mut current = 0i64;
        let mut i = 0;
        while i < events.len() {
            let e = events[i].0;
            let mut jump = 0;
            while i < events.len() && events[i].0 == e {
                jump += events[i].1;
                i += 1;
            }
            if jump != 0 {
                current += jump;
                breakpoints.push(e);
                values.push(current);
            }
        }
        Self { breakpoints, values, meta }
    }

    pub fn value_at(&self, energy: f64) -> i64 {
        match self.breakpoints.partition_point(|&b| b <= energy) {
            0 => 0,
            k => self.values[k - 1],
        }
    }

    /// Constancy intervals `(start, end, value)` clipped to `[lo, hi]`,
    /// zero-valued pieces omitted.
    pub fn pieces(&self, lo: f64, hi: f64) -> Vec<(f64, f64, i64)> {
        let mut out = Vec::new();
        for (k, (&start, &value)) in self.breakpoints.iter().zip(&self.values).enumerate() {
            let end = self.breakpoints.get(k + 1).copied().unwrap_or(f64::INFINITY);
            let a = start.max(lo);
            let b = end.min(hi);
            if value != 0 && b > a {
                out.push((a, b, value));
            }
        }
        out
    }

    /// Two-sided Laplace transform `∫ e^{-tE} ξ(E) dE`, summed over pieces.
    pub fn laplace_transform(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (a, b, v) in self.pieces(f64::NEG_INFINITY, f64::INFINITY) {
            let tail = if b.is_finite() { (-t * b).exp() } else { 0.0 };
            acc += v as f64 * ((-t * a).exp() - tail);
        }
        acc / t
    }

    pub fn min_max_on(&self, lo: f64, hi: f64) -> (i64, i64) {
        let mut min = self.value_at(lo);
        let mut max = min;
        for (k, &b) in self.breakpoints.iter().enumerate() {
            if b > lo && b <= hi {
                min = min.min(self.values[k]);
                max = max.max(self.values[k]);
            }
        }
        (min, max)
    }
}

impl SsfCurve {
    pub fn meta(&self) -> &CurveMeta {
        match self {
            Self::Exact(c) => &c.meta,
            Self::Sampled(c) => &c.meta,
        }
    }

    /// Value at `energy`; sampled curves answer only at probe energies.
    pub fn value_at(&self, energy: f64) -> Option<i64> {
        match self {
            Self::Exact(c) => Some(c.value_at(energy)),
            Self::Sampled(c) => c.energies.iter().position(|&e| e == energy).map(|i| c.values[i]),
        }
    }
}

pub fn ssf_curve(
    op1: &DirichletOperator,
    op0: &DirichletOperator,
    probe: &Probe,
    oracle_cap: usize,
) -> Result<SsfCurve> {
    if !op1.grid.same_as(&op0.grid) {
        return Err(Error::GridMismatch);
    }
    let meta = CurveMeta::of(op1);
    match probe {
        Probe::Exact => {
            let s0 = dense_spectrum(op0, oracle_cap)?;
            let s1 = dense_spectrum(op1, oracle_cap)?;
            Ok(SsfCurve::Exact(ExactCurve::from_spectra(&s0, &s1, meta)))
        }
        Probe::Grid(energies) => {
            let counts: Vec<_> =
                energies.par_iter().map(|&e| relative_count(op1, op0, e)).collect::<Result<Vec<_>>>()?;
            Ok(SsfCurve::Sampled(SampledCurve {
                energies: energies.clone(),
                values: counts.iter().map(|c| c.value).collect(),
                coincident: counts.iter().map(|c| c.coincident).collect(),
                meta,
            }))
        }
    }
}

/// Continuous factor `g` of a weight `f = χ_I g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightFactor {
    Constant {
        value: f64,
    },
    /// `Σ_k c_k E^k`.
    Polynomial {
        coefficients: Vec<f64>,
    },
    /// `scale · exp(rate · E)`.
    Exponential {
        scale: f64,
        rate: f64,
    },
}

impl WeightFactor {
    pub fn eval(&self, e: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Polynomial { coefficients } => coefficients.iter().rev().fold(0.0, |acc, c| acc * e + c),
            Self::Exponential { scale, rate } => scale * (rate * e).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightFunction {
    pub lo: f64,
    pub hi: f64,
    pub g: WeightFactor,
}

impl WeightFunction {
    pub fn new(lo: f64, hi: f64, g: WeightFactor) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidArgument(format!("weight interval [{lo}, {hi}] is not a finite interval")));
        }
        Ok(Self { lo, hi, g })
    }

    pub fn indicator(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, WeightFactor::Constant { value: 1.0 })
    }

    pub fn eval(&self, e: f64) -> f64 {
        if e >= self.lo && e <= self.hi {
            self.g.eval(e)
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Averaged {
    pub value: f64,
    /// Zero in exact mode (beyond quadrature tolerance); a bound on the
    /// trapezoid error caused by unresolved jumps in sampled mode.
    pub error_bound: f64,
}

/// `∫ ξ_L(E) f(E) dE`.
pub fn averaged_ssf(curve: &SsfCurve, f: &WeightFunction) -> Result<Averaged> {
    match curve {
        SsfCurve::Exact(c) => {
            let value = c
                .pieces(f.lo, f.hi)
                .into_iter()
                .map(|(a, b, v)| v as f64 * adaptive_simpson(|e| f.g.eval(e), a, b, QUAD_REL_TOL))
                .sum();
            Ok(Averaged { value, error_bound: 0.0 })
        }
        SsfCurve::Sampled(c) => sampled_average(c, f),
    }
}

fn sampled_average(c: &SampledCurve, f: &WeightFunction) -> Result<Averaged> {
    let (Some(&first), Some(&last)) = (c.energies.first(), c.energies.last()) else {
        return Err(Error::OutsideProbedRange { lo: f.lo, hi: f.hi, probe_lo: f64::NAN, probe_hi: f64::NAN });
    };
    let slack = 1e-12 * (1.0 + first.abs().max(last.abs()));
    if f.lo < first - slack || f.hi > last + slack {
        return Err(Error::OutsideProbedRange { lo: f.lo, hi: f.hi, probe_lo: first, probe_hi: last });
    }
    let xi = |k: usize| c.values[k] as f64;
    let mut value = 0.0;
    let mut bound = 0.0;
    for k in 0..c.energies.len().saturating_sub(1) {
        let (e0, e1) = (c.energies[k], c.energies[k + 1]);
        let a = e0.max(f.lo);
        let b = e1.min(f.hi);
        if b <= a {
            continue;
        }
        // linear interpolant of ξ on the cell, times g at the clipped ends
        let lerp = |e: f64| xi(k) + (xi(k + 1) - xi(k)) * (e - e0) / (e1 - e0);
        let fa = f.g.eval(a);
        let fb = f.g.eval(b);
        value += 0.5 * (b - a) * (lerp(a) * fa + lerp(b) * fb);
        bound += 0.5 * (xi(k + 1) - xi(k)).abs() * fa.abs().max(fb.abs()) * (b - a);
    }
    Ok(Averaged { value, error_bound: bound })
}

/// `(1/δ) ∫_E^{E+δ} ξ_L`.
pub fn delta_average(curve: &SsfCurve, energy: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    match curve {
        SsfCurve::Exact(c) => {
            let area: f64 = c.pieces(energy, energy + delta).into_iter().map(|(a, b, v)| v as f64 * (b - a)).sum();
            Ok(area / delta)
        }
        SsfCurve::Sampled(c) => {
            let f = WeightFunction::indicator(energy, energy + delta)?;
            Ok(sampled_average(c, &f)?.value / delta)
        }
    }
}

/// Running means `M_K = (1/K) Σ_{k≤K} values[k]`.
pub fn cesaro_mean(values: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            sum += v;
            sum / (k + 1) as f64
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupScanRow {
    pub edge: f64,
    pub value: i64,
    pub running_max: i64,
    pub coincident: bool,
}

/// `ξ_L(E)` along a list of lengths, with its running maximum.
///
/// `builder(L)` returns `(H₁^{(L)}, H₀^{(L)})`.
pub fn sup_scan<F>(energy: f64, edges: &[f64], builder: F) -> Result<Vec<SupScanRow>>
where
    F: Fn(f64) -> Result<(DirichletOperator, DirichletOperator)> + Sync,
{
    let values: Vec<_> = edges
        .par_iter()
        .map(|&edge| {
            let (op1, op0) = builder(edge)?;
            relative_count(&op1, &op0, energy)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut running = i64::MIN;
    Ok(edges
        .iter()
        .zip(values)
        .map(|(&edge, rc)| {
            running = running.max(rc.value);
            SupScanRow { edge, value: rc.value, running_max: running, coincident: rc.coincident }
        })
        .collect())
}

/// Near-degenerate group of free lattice eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeCluster {
    pub lo: f64,
    pub hi: f64,
    pub multiplicity: usize,
    /// Probe energy just above the cluster, `hi + window/10`.
    pub energy: f64,
}

/// Densest cluster of eigenvalues of the free operator on `Λ_L` within
/// `window`, among clusters starting in `[lo, hi]`; ties go to the lowest.
///
/// The free spectrum is the tensor sum of the 1D closed forms
/// `(1 − cos(kπ/(n+1)))/h²`.
pub fn free_cluster(dim: usize, edge: f64, mesh: f64, lo: f64, hi: f64, window: f64) -> Result<FreeCluster> {
    let grid = crate::lattice::build_grid(dim, edge, mesh)?;
    if !(window > 0.0) || !(lo < hi) {
        return Err(Error::InvalidArgument("cluster search needs window > 0 and lo < hi".into()));
    }
    let n = grid.n_per_axis();
    let h2 = mesh * mesh;
    let axis: Vec<f64> =
        (1..=n).map(|k| (1.0 - (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos()) / h2).collect();
    let mut sums = vec![0.0];
    for _ in 0..dim {
        sums = sums.iter().flat_map(|s| axis.iter().map(move |a| s + a)).filter(|e| *e <= hi + window).collect();
    }
    sums.sort_by(f64::total_cmp);
    let mut best: Option<FreeCluster> = None;
    for (i, &start) in sums.iter().enumerate() {
        if start < lo || start > hi {
            continue;
        }
        let end = sums.partition_point(|&e| e <= start + window);
        let multiplicity = end - i;
        if best.is_none_or(|b| multiplicity > b.multiplicity) {
            let top = sums[end - 1];
            best = Some(FreeCluster { lo: start, hi: top, multiplicity, energy: top + 0.1 * window });
        }
    }
    best.ok_or_else(|| Error::InvalidArgument(format!("no free eigenvalue in [{lo}, {hi}]")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigencount::DEFAULT_ORACLE_CAP;
    use crate::lattice::{assemble_operator, build_grid, PotentialField};

    fn unit_box_curve(a: f64, b: f64) -> SsfCurve {
        // ξ = 1 on [a, b): one eigenvalue of H₀ at a displaced to b
        SsfCurve::Exact(ExactCurve::from_spectra(&[a], &[b], CurveMeta::default()))
    }

    #[test]
    fn zero_perturbation_gives_zero_curve() {
        let g = build_grid(1, 8.0, 0.25).unwrap();
        let op = assemble_operator(&g, None, None).unwrap();
        let SsfCurve::Exact(c) = ssf_curve(&op, &op, &Probe::Exact, DEFAULT_ORACLE_CAP).unwrap() else { panic!() };
        assert!(c.breakpoints.is_empty());
        let f = WeightFunction::indicator(0.0, 10.0).unwrap();
        assert_eq!(averaged_ssf(&SsfCurve::Exact(c), &f).unwrap().value, 0.0);
    }

    #[test]
    fn box_integrals() {
        let curve = unit_box_curve(1.0, 2.5);
        let f = WeightFunction::indicator(0.0, 4.0).unwrap();
        assert!((averaged_ssf(&curve, &f).unwrap().value - 1.5).abs() < 1e-14);
        let f = WeightFunction::new(0.0, 4.0, WeightFactor::Polynomial { coefficients: vec![0.0, 1.0] }).unwrap();
        assert!((averaged_ssf(&curve, &f).unwrap().value - (2.5f64.powi(2) - 1.0) / 2.0).abs() < 1e-10);
    }

    #[test]
    fn delta_average_examples() {
        let curve = unit_box_curve(1.0, 5.0);
        assert!((delta_average(&curve, 2.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        // jump at E + δ/2
        assert!((delta_average(&curve, 0.5, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(delta_average(&curve, 0.5, 0.0).is_err());
    }

    #[test]
    fn cesaro_examples() {
        assert_eq!(cesaro_mean(&[3.0; 4]), vec![3.0; 4]);
        assert_eq!(cesaro_mean(&[0.0, 2.0]), vec![0.0, 1.0]);
        let alt: Vec<f64> = (0..100).map(|k| if k % 2 == 0 { 1.0 } else { 0.0 }).collect();
        assert_eq!(*cesaro_mean(&alt).last().unwrap(), 0.5);
    }

    #[test]
    fn laplace_of_single_box() {
        let curve = ExactCurve::from_spectra(&[1.0], &[2.0], CurveMeta::default());
        let t = 0.7;
        let expected = ((-t * 1.0f64).exp() - (-t * 2.0f64).exp()) / t;
        assert!((curve.laplace_transform(t) - expected).abs() < 1e-15);
    }

    #[test]
    fn sampled_range_is_checked() {
        let curve = SsfCurve::Sampled(SampledCurve {
            energies: uniform_probe(0.0, 1.0, 11),
            values: vec![0; 11],
            coincident: vec![false; 11],
            meta: CurveMeta::default(),
        });
        let f = WeightFunction::indicator(0.5, 2.0).unwrap();
        assert!(matches!(averaged_ssf(&curve, &f), Err(Error::OutsideProbedRange { .. })));
    }

    #[test]
    fn bound_state_like_shift_in_d1() {
        let g = build_grid(1, 6.0, 0.125).unwrap();
        let v = PotentialField::box_indicator(1, 2.0, 1.0);
        let op0 = assemble_operator(&g, None, None).unwrap();
        let op1 = assemble_operator(&g, None, Some(&v)).unwrap();
        let s0 = dense_spectrum(&op0, DEFAULT_ORACLE_CAP).unwrap();
        let s1 = dense_spectrum(&op1, DEFAULT_ORACLE_CAP).unwrap();
        let SsfCurve::Exact(c) = ssf_curve(&op1, &op0, &Probe::Exact, DEFAULT_ORACLE_CAP).unwrap() else { panic!() };
        assert!(s1[0] > s0[0]);
        let mid = 0.5 * (s0[0] + s1[0].min(s0[1]));
        assert_eq!(c.value_at(mid), 1);
        assert_eq!(c.value_at(s0[0] - 1e-9), 0);
    }

    #[test]
    fn free_cluster_counts_symmetric_pairs() {
        // n = 3: μ₁ + μ₃ = 2μ₂ = 2/h², shared by (1,3), (3,1) and (2,2)
        let c = free_cluster(2, 4.0, 1.0, 0.0, 10.0, 1e-9).unwrap();
        assert_eq!(c.multiplicity, 3);
        assert!((c.lo - 2.0).abs() < 1e-12);
        let one = free_cluster(1, 4.0, 1.0, 0.0, 10.0, 1e-9).unwrap();
        assert_eq!(one.multiplicity, 1);
        assert!((one.lo - (1.0 - std::f64::consts::FRAC_1_SQRT_2)).abs() < 1e-12);
        assert!(free_cluster(1, 4.0, 1.0, 50.0, 60.0, 1e-3).is_err());
    }
}
