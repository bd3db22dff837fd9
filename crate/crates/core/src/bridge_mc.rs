//! Brownian-bridge Monte Carlo for the Laplace transform of the spectral
//! shift function.
//!
//! For `H = −Δ/2 + W` the heat-kernel diagonal is `(2πt)^{-d/2}` times a
//! normalized expectation over bridges pinned at `x` at times `0` and `t`.
//! The Laplace transform of `ξ_L` is `(1/t)·tr[e^{-tH₀} − e^{-tH₁}]`, so
//!
//! ```text
//! t (2πt)^{d/2} ξ̃(t) = ∫ dx χ_Λ(x) E_{x,x}[ χ_Λ^t(b) · e^{-∫U(b)} · (1 − e^{-∫V(b)}) ].
//! ```
//!
//! Estimates are evaluated in the frame where `V` sits at the origin and `U`
//! is translated by the base point `x0`; a shift only moves the box. Every
//! path is generated from its own ChaCha stream (stream = path index), and
//! paths are reduced in fixed-size blocks merged in block order, so results
//! are bit-identical for any thread count.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::eigencount::dense_spectrum;
use crate::error::{Error, Result};
use crate::lattice::{allowed_shifts, Cube, FourierTerm, PotentialField, SecurityDistance, SymmetricOperator};
use crate::quadrature::compensated_sum;

/// Paths per reduction block. Part of the determinism contract: changing it
/// changes the rounding of the merged statistics.
pub const BLOCK_SIZE: usize = 512;

/// Tail level used to pick the default truncation radius.
pub const TRUNCATION_TAIL_TARGET: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BridgeSeed {
    pub master: u64,
    pub stream: u64,
}

fn rng_for(seed: BridgeSeed) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.master);
    rng.set_stream(seed.stream);
    rng
}

/// Discrete bridge on the uniform time grid `s_k = k t / m`.
#[derive(Clone, Debug, PartialEq)]
pub struct BridgePath {
    pub start: Vec<f64>,
    pub horizon: f64,
    pub slices: usize,
    pub seed: BridgeSeed,
    positions: Vec<f64>,
}

impl BridgePath {
    pub fn dim(&self) -> usize {
        self.start.len()
    }

    pub fn position(&self, k: usize) -> &[f64] {
        let d = self.dim();
        &self.positions[k * d..(k + 1) * d]
    }

    pub fn positions(&self) -> impl Iterator<Item = &[f64]> {
        self.positions.chunks_exact(self.dim())
    }
}

/// Fills `out` (length `(m+1)·d`) with a bridge pinned at the origin.
///
/// Points are placed by recursive bisection in breadth-first order, `d`
/// normals per point. For `m` a power of two the draws for `m` are a prefix
/// of the draws for `2m`, so refining the time grid keeps the coarse points.
fn fill_bridge_shape(
    rng: &mut ChaCha8Rng,
    dim: usize,
    t: f64,
    m: usize,
    out: &mut [f64],
    queue: &mut VecDeque<(usize, usize)>,
) {
    out.fill(0.0);
    let dt = t / m as f64;
    queue.clear();
    queue.push_back((0, m));
    while let Some((a, b)) = queue.pop_front() {
        if b - a < 2 {
            continue;
        }
        let mid = (a + b) / 2;
        let wa = (b - mid) as f64 / (b - a) as f64;
        let wb = (mid - a) as f64 / (b - a) as f64;
        let sd = ((mid - a) as f64 * (b - mid) as f64 / (b - a) as f64 * dt).sqrt();
        for j in 0..dim {
            let z: f64 = StandardNormal.sample(rng);
            out[mid * dim + j] = wa * out[a * dim + j] + wb * out[b * dim + j] + sd * z;
        }
        queue.push_back((a, mid));
        queue.push_back((mid, b));
    }
}

pub fn sample_bridge(x: &[f64], t: f64, m: usize, seed: BridgeSeed) -> Result<BridgePath> {
    if !(t > 0.0 && t.is_finite()) || m < 2 || x.is_empty() {
        return Err(Error::InvalidArgument(format!("bridge needs t > 0, m ≥ 2, d ≥ 1 (t={t}, m={m})")));
    }
    let d = x.len();
    let mut positions = vec![0.0; (m + 1) * d];
    let mut rng = rng_for(seed);
    fill_bridge_shape(&mut rng, d, t, m, &mut positions, &mut VecDeque::new());
    for (k, p) in positions.iter_mut().enumerate() {
        *p += x[k % d];
    }
    Ok(BridgePath { start: x.to_vec(), horizon: t, slices: m, seed, positions })
}

fn trapezoid_weight(k: usize, m: usize) -> f64 {
    if k == 0 || k == m {
        0.5
    } else {
        1.0
    }
}

/// `∫₀ᵗ W(b(s)) ds` by the trapezoid rule on the path's time grid.
pub fn path_integral(path: &BridgePath, field: &PotentialField) -> Result<f64> {
    let m = path.slices;
    let dt = path.horizon / m as f64;
    let sum: f64 = path.positions().enumerate().map(|(k, x)| trapezoid_weight(k, m) * field.value(x)).sum();
    let value = dt * sum;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinitePathIntegral)
    }
}

/// `𝒰_t(b) = exp(−∫U)`.
pub fn functional_u(path: &BridgePath, background: &PotentialField) -> Result<f64> {
    Ok((-path_integral(path, background)?).exp())
}

/// `𝒱_t(b) = 1 − exp(−∫V)`.
pub fn functional_v(path: &BridgePath, perturbation: &PotentialField) -> Result<f64> {
    Ok(-(-path_integral(path, perturbation)?).exp_m1())
}

/// `χ_Λ^t(b)`: 1 iff every sampled position lies in the open cube.
pub fn cutoff(path: &BridgePath, region: &Cube) -> bool {
    path.positions().all(|x| region.contains(x))
}

#[derive(Clone, Debug, PartialEq)]
pub struct McParams {
    pub n_samples: usize,
    pub slices: usize,
    pub seed: u64,
    /// Spatial truncation radius around `supp V`; `None` picks the default.
    pub trunc_radius: Option<f64>,
    /// Target spacing of the midpoint rule for `∫dx`.
    pub spatial_step: f64,
}

impl McParams {
    /// `m = 64·⌈t⌉` slices.
    pub fn default_slices(t: f64) -> usize {
        64 * (t.ceil() as usize).max(1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McMeta {
    pub t: f64,
    pub edge: Option<f64>,
    pub shift: Vec<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub m_slices: usize,
    pub meta: McMeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaplaceSource {
    McFinite,
    McInfinite,
    TraceOracle,
}

impl LaplaceSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::McFinite => "mc-finite",
            Self::McInfinite => "mc-infinite",
            Self::TraceOracle => "trace-oracle",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaplacePoint {
    pub t: f64,
    pub xi_tilde: f64,
    pub source: LaplaceSource,
}

/// Running mean/variance, merged pairwise in a fixed order.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Stats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Stats {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(&mut self, other: &Stats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        self.mean += delta * other.n as f64 / n as f64;
        self.m2 += other.m2 + delta * delta * (self.n as f64 * other.n as f64 / n as f64);
        self.n = n;
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2.max(0.0) / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

/// `∫W(b + offset_j)` for a fixed set of offsets, reusing per-path work.
///
/// Fourier-representable backgrounds separate path and offset:
/// `∫ e^{iθ_n(b+x)} = e^{iθ_n(x)} Σ_k w_k e^{iθ_n(b_k)}`, so one pass over the
/// path serves every offset. Other fields are evaluated point by point.
struct OffsetIntegrator<'a> {
    field: &'a PotentialField,
    dim: usize,
    offsets: Vec<f64>,
    spectral: Option<Spectral>,
}

struct Spectral {
    terms: Vec<FourierTerm>,
    wave: Vec<Vec<f64>>,
    // per offset, per term: (cos, sin) of the phase at the offset
    phases: Vec<(f64, f64)>,
    // per term: Σ_k w_k (cos, sin) of the phase along the current path
    sums: Vec<(f64, f64)>,
}

impl<'a> OffsetIntegrator<'a> {
    fn new(field: &'a PotentialField, dim: usize, offsets: Vec<f64>) -> Self {
        let spectral = field.fourier_terms().map(|terms| {
            let period = field.period().expect("backgrounds have periods").to_vec();
            let wave: Vec<Vec<f64>> = terms
                .iter()
                .map(|t| {
                    t.frequencies.iter().zip(&period).map(|(n, p)| std::f64::consts::TAU * *n as f64 / p).collect()
                })
                .collect();
            let mut phases = Vec::with_capacity(offsets.len() / dim.max(1) * terms.len());
            for x in offsets.chunks_exact(dim) {
                for k in &wave {
                    let theta: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum();
                    phases.push((theta.cos(), theta.sin()));
                }
            }
            let n_terms = terms.len();
            Spectral { terms, wave, phases, sums: vec![(0.0, 0.0); n_terms] }
        });
        Self { field, dim, offsets, spectral }
    }

    fn prepare(&mut self, shape: &[f64], m: usize, dt: f64) {
        let dim = self.dim;
        if let Some(sp) = &mut self.spectral {
            for (s, k) in sp.sums.iter_mut().zip(&sp.wave) {
                if k.iter().all(|v| *v == 0.0) {
                    *s = (dt * m as f64, 0.0);
                    continue;
                }
                let (mut c, mut sn) = (0.0, 0.0);
                for (idx, x) in shape.chunks_exact(dim).enumerate() {
                    let theta: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum();
                    let w = trapezoid_weight(idx, m);
                    let (st, ct) = theta.sin_cos();
                    c += w * ct;
                    sn += w * st;
                }
                *s = (dt * c, dt * sn);
            }
        }
    }

    fn integral(&self, j: usize, shape: &[f64], m: usize, dt: f64) -> f64 {
        match &self.spectral {
            Some(sp) => {
                let n_terms = sp.terms.len();
                let ph = &sp.phases[j * n_terms..(j + 1) * n_terms];
                sp.terms
                    .iter()
                    .zip(ph)
                    .zip(&sp.sums)
                    .map(|((term, (cx, sx)), (cs, ss))| term.coefficient * (cx * cs - sx * ss))
                    .sum()
            }
            None => {
                let dim = self.dim;
                let off = &self.offsets[j * dim..(j + 1) * dim];
                let mut p = vec![0.0; dim];
                let mut acc = 0.0;
                for (idx, x) in shape.chunks_exact(dim).enumerate() {
                    for ((pi, xi), oi) in p.iter_mut().zip(x).zip(off) {
                        *pi = xi + oi;
                    }
                    acc += trapezoid_weight(idx, m) * self.field.value(&p);
                }
                dt * acc
            }
        }
    }
}

/// Truncation radius at which `2 Σ_k e^{-2k²r²/t}` drops below `target`.
pub fn tail_radius(t: f64, target: f64) -> f64 {
    let series = |r: f64| 2.0 * (1..=50).map(|k| (-2.0 * (k * k) as f64 * r * r / t).exp()).sum::<f64>();
    let (mut lo, mut hi) = (0.0, t.sqrt());
    while series(hi) > target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if series(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Default truncation radius `max(3√t, r*)`.
pub fn default_trunc_radius(t: f64) -> f64 {
    (3.0 * t.sqrt()).max(tail_radius(t, TRUNCATION_TAIL_TARGET))
}

/// Two-sided tail of the one-dimensional bridge maximum,
/// `P[max_{[0,t]} |b| > r] = 2 Σ_{k≥1} (−1)^{k+1} e^{−2k²r²/t}`.
pub fn bridge_max_tail_series(r: f64, t: f64) -> f64 {
    if r <= 0.0 {
        return 1.0;
    }
    let mut acc = 0.0;
    for k in 1..=200u32 {
        let term = (-2.0 * (k * k) as f64 * r * r / t).exp();
        acc += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * acc).clamp(0.0, 1.0)
}

/// Bound, in `ξ̃` units, on the part of `∫dx` discarded outside the dilated
/// support. Uses `|𝒰𝒱| ≤ e^{t U₋}(1 + e^{t V₋})` and
/// `P[max |b|_∞ > ρ] ≤ 2d e^{−2ρ²/t}` over sup-norm shells of `Λ_{ℓ+2ρ}`.
pub fn truncation_tail_bound(background: &PotentialField, perturbation: &PotentialField, t: f64, radius: f64) -> f64 {
    let d = perturbation.dim();
    let ell = perturbation.support().map(|c| c.side).unwrap_or(0.0);
    let u_minus = (-background.lower_bound()).max(0.0);
    let v_minus = (-perturbation.lower_bound()).max(0.0);
    let c = (t * u_minus).exp() * (1.0 + (t * v_minus).exp());
    let df = d as f64;
    let density = |rho: f64| 2.0 * df * (ell + 2.0 * rho).powi(d as i32 - 1) * 2.0 * df * (-2.0 * rho * rho / t).exp();
    let upper = radius + 12.0 * t.sqrt();
    let steps = 2000;
    let h = (upper - radius) / steps as f64;
    let mut acc = 0.0;
    for i in 0..steps {
        let a = radius + i as f64 * h;
        acc += h / 6.0 * (density(a) + 4.0 * density(a + 0.5 * h) + density(a + h));
    }
    c * acc / (t * (std::f64::consts::TAU * t).powf(0.5 * df))
}

/// Background, perturbation and shift geometry for the Laplace estimators.
#[derive(Clone, Debug)]
pub struct LaplaceScenario {
    pub background: PotentialField,
    /// Unshifted perturbation supported in `Λ_ℓ` around the origin.
    pub perturbation: PotentialField,
    pub x0: Vec<f64>,
    pub security: SecurityDistance,
}

impl LaplaceScenario {
    pub fn new(
        background: PotentialField,
        perturbation: PotentialField,
        x0: Vec<f64>,
        security: SecurityDistance,
    ) -> Result<Self> {
        let d = x0.len();
        for f in [&background, &perturbation] {
            if f.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, got: f.dim() });
            }
        }
        if !background.is_background() {
            return Err(Error::InvalidArgument("background must be a periodic field".into()));
        }
        match perturbation.support() {
            None => return Err(Error::NotAPerturbation),
            Some(c) if c.center.iter().any(|v| *v != 0.0) => {
                return Err(Error::InvalidArgument("perturbation must be centered at the origin".into()))
            }
            _ => {}
        }
        Ok(Self { background, perturbation, x0, security })
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn ell(&self) -> f64 {
        self.perturbation.support().map(|c| c.side).unwrap_or(0.0)
    }

    pub fn period(&self) -> &[f64] {
        self.background.period().unwrap_or(&[])
    }

    pub fn allowed_shifts(&self, edge: f64) -> Result<crate::lattice::ShiftSet> {
        let ell = self.ell();
        let sec = self.security.clone();
        allowed_shifts(&self.x0, edge, self.period(), ell, move |l| sec.eval(l, ell))
    }

    fn nodes(&self, radius: f64, step: f64) -> (Vec<f64>, f64) {
        let d = self.dim();
        let side = self.ell() + 2.0 * radius;
        let per_axis = ((side / step).ceil() as usize).max(1);
        let h = side / per_axis as f64;
        let axis: Vec<f64> = (0..per_axis).map(|i| -0.5 * side + (i as f64 + 0.5) * h).collect();
        let total = per_axis.pow(d as u32);
        let mut nodes = Vec::with_capacity(total * d);
        for flat in 0..total {
            let mut rest = flat;
            for _ in 0..d {
                nodes.push(axis[rest % per_axis]);
                rest /= per_axis;
            }
        }
        (nodes, h.powi(d as i32))
    }
}

/// Estimate for one region of a batch, with its paired difference to the
/// batch's reference region (same paths).
#[derive(Clone, Debug, PartialEq)]
pub struct RegionEstimate {
    pub estimate: McEstimate,
    pub diff_to_reference: McEstimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaplaceRun {
    pub point: LaplacePoint,
    pub estimate: McEstimate,
    pub trunc_radius: f64,
    pub trunc_tail_bound: f64,
    /// Tail bound exceeded [`TRUNCATION_TAIL_TARGET`].
    pub tail_warning: bool,
}

fn validate_params(t: f64, params: &McParams) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    if params.n_samples < 2 || params.slices < 2 {
        return Err(Error::InvalidArgument("need n_samples ≥ 2 and slices ≥ 2".into()));
    }
    if !(params.spatial_step > 0.0) {
        return Err(Error::InvalidArgument("spatial_step must be positive".into()));
    }
    if let Some(r) = params.trunc_radius {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument("trunc_radius must be positive".into()));
        }
    }
    Ok(())
}

/// Coupled estimates of `ξ̃` for several regions: `None` is `ℝ^d` (no box,
/// no cut-off), `Some(cube)` is the box in the frame where `V` sits at the
/// origin. All regions see the same paths; differences are reported against
/// `regions[reference]`.
pub fn laplace_mc_regions(
    scenario: &LaplaceScenario,
    t: f64,
    params: &McParams,
    regions: &[Option<Cube>],
    reference: usize,
) -> Result<Vec<RegionEstimate>> {
    validate_params(t, params)?;
    if reference >= regions.len() {
        return Err(Error::InvalidArgument("reference region out of range".into()));
    }
    let d = scenario.dim();
    let m = params.slices;
    let dt = t / m as f64;
    let radius = params.trunc_radius.unwrap_or_else(|| default_trunc_radius(t));
    let (nodes, weight) = scenario.nodes(radius, params.spatial_step);
    let n_nodes = nodes.len() / d;
    let norm = t * (std::f64::consts::TAU * t).powf(0.5 * d as f64);
    let half_ell = 0.5 * scenario.ell();
    let v_is_zero = scenario.perturbation.is_zero();

    // node-in-region masks
    let node_in: Vec<Vec<bool>> = regions
        .iter()
        .map(|r| match r {
            None => vec![true; n_nodes],
            Some(c) => nodes.chunks_exact(d).map(|x| c.contains(x)).collect(),
        })
        .collect();

    let u_offsets: Vec<f64> =
        nodes.chunks_exact(d).flat_map(|x| x.iter().zip(&scenario.x0).map(|(a, b)| a + b)).collect();

    let n_blocks = params.n_samples.div_ceil(BLOCK_SIZE);
    let block_stats: Vec<Vec<(Stats, Stats)>> = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut stats = vec![(Stats::default(), Stats::default()); regions.len()];
            let mut shape = vec![0.0; (m + 1) * d];
            let mut queue = VecDeque::new();
            let mut u_int = OffsetIntegrator::new(&scenario.background, d, u_offsets.clone());
            let mut g = vec![0.0; regions.len()];
            let mut lo = vec![0.0; d];
            let mut hi = vec![0.0; d];
            let mut p = vec![0.0; d];
            let start = block * BLOCK_SIZE;
            let end = (start + BLOCK_SIZE).min(params.n_samples);
            for path_index in start..end {
                g.iter_mut().for_each(|v| *v = 0.0);
                if !v_is_zero {
                    let mut rng = rng_for(BridgeSeed { master: params.seed, stream: path_index as u64 });
                    fill_bridge_shape(&mut rng, d, t, m, &mut shape, &mut queue);
                    lo.fill(f64::INFINITY);
                    hi.fill(f64::NEG_INFINITY);
                    for x in shape.chunks_exact(d) {
                        for j in 0..d {
                            lo[j] = lo[j].min(x[j]);
                            hi[j] = hi[j].max(x[j]);
                        }
                    }
                    u_int.prepare(&shape, m, dt);
                    for (node_idx, xn) in nodes.chunks_exact(d).enumerate() {
                        // the shifted path must meet the closed support of V
                        if (0..d).any(|j| xn[j] + hi[j] < -half_ell || xn[j] + lo[j] > half_ell) {
                            continue;
                        }
                        let mut iv = 0.0;
                        for (k, x) in shape.chunks_exact(d).enumerate() {
                            for j in 0..d {
                                p[j] = x[j] + xn[j];
                            }
                            iv += trapezoid_weight(k, m) * scenario.perturbation.value(&p);
                        }
                        iv *= dt;
                        if iv == 0.0 {
                            continue;
                        }
                        let iu = u_int.integral(node_idx, &shape, m, dt);
                        let val = weight * (-iu).exp() * -(-iv).exp_m1();
                        for (r, region) in regions.iter().enumerate() {
                            if !node_in[r][node_idx] {
                                continue;
                            }
                            let inside = match region {
                                None => true,
                                Some(c) => (0..d).all(|j| xn[j] + lo[j] > c.lower(j) && xn[j] + hi[j] < c.upper(j)),
                            };
                            if inside {
                                g[r] += val;
                            }
                        }
                    }
                }
                let reference_value = g[reference] / norm;
                for (r, s) in stats.iter_mut().enumerate() {
                    let v = g[r] / norm;
                    s.0.push(v);
                    s.1.push(v - reference_value);
                }
            }
            stats
        })
        .collect();

    let mut totals = vec![(Stats::default(), Stats::default()); regions.len()];
    for block in &block_stats {
        for (tot, s) in totals.iter_mut().zip(block) {
            tot.0.merge(&s.0);
            tot.1.merge(&s.1);
        }
    }
    let make = |s: &Stats, region: &Option<Cube>| McEstimate {
        mean: s.mean,
        std_error: s.std_error(),
        n_samples: params.n_samples,
        m_slices: m,
        meta: McMeta {
            t,
            edge: region.as_ref().map(|c| c.side),
            shift: region.as_ref().map(|c| c.center.iter().map(|v| -v).collect()).unwrap_or_else(|| vec![0.0; d]),
            seed: params.seed,
        },
    };
    Ok(totals
        .iter()
        .zip(regions)
        .map(|(s, region)| RegionEstimate { estimate: make(&s.0, region), diff_to_reference: make(&s.1, region) })
        .collect())
}

fn finish_run(
    scenario: &LaplaceScenario,
    t: f64,
    params: &McParams,
    estimate: McEstimate,
    source: LaplaceSource,
) -> LaplaceRun {
    let radius = params.trunc_radius.unwrap_or_else(|| default_trunc_radius(t));
    let bound = truncation_tail_bound(&scenario.background, &scenario.perturbation, t, radius);
    LaplaceRun {
        point: LaplacePoint { t, xi_tilde: estimate.mean, source },
        estimate,
        trunc_radius: radius,
        trunc_tail_bound: bound,
        tail_warning: bound > TRUNCATION_TAIL_TARGET,
    }
}

/// Box `Λ_L(−shift)` in the frame where the perturbation sits at the origin.
pub fn frame_box(edge: f64, shift: &[f64]) -> Cube {
    Cube::new(shift.iter().map(|v| -v).collect(), edge)
}

/// Estimate of `ξ̃_L(t)` for `H₁ = H₀ + V_shift` on `Λ_L`.
pub fn finite_volume_laplace_mc(
    scenario: &LaplaceScenario,
    edge: f64,
    shift: &[f64],
    t: f64,
    params: &McParams,
) -> Result<LaplaceRun> {
    if shift.len() != scenario.dim() {
        return Err(Error::DimensionMismatch { expected: scenario.dim(), got: shift.len() });
    }
    if !scenario.allowed_shifts(edge)?.contains(shift) {
        return Err(Error::ShiftNotAllowed(shift.to_vec()));
    }
    let regions = [Some(frame_box(edge, shift))];
    let est = laplace_mc_regions(scenario, t, params, &regions, 0)?.remove(0).estimate;
    Ok(finish_run(scenario, t, params, est, LaplaceSource::McFinite))
}

/// Estimate of the infinite-volume limit `ξ̃(t)` (no box, no cut-off).
pub fn infinite_volume_laplace_mc(scenario: &LaplaceScenario, t: f64, params: &McParams) -> Result<LaplaceRun> {
    let est = laplace_mc_regions(scenario, t, params, &[None], 0)?.remove(0).estimate;
    Ok(finish_run(scenario, t, params, est, LaplaceSource::McInfinite))
}

/// `(1/t) Σ_k [e^{−tλ⁰_k} − e^{−tλ¹_k}]` from dense spectra.
pub fn trace_laplace_oracle<O: SymmetricOperator + ?Sized>(
    op1: &O,
    op0: &O,
    t: f64,
    oracle_cap: usize,
) -> Result<LaplacePoint> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let s0 = dense_spectrum(op0, oracle_cap)?;
    let s1 = dense_spectrum(op1, oracle_cap)?;
    let trace = compensated_sum(s0.iter().zip(&s1).map(|(a, b)| (-t * a).exp() - (-t * b).exp()));
    Ok(LaplacePoint { t, xi_tilde: trace / t, source: LaplaceSource::TraceOracle })
}

/// Monte Carlo estimate of `P[max_{[0,t]} |b(s)| > r]` for the bridge pinned
/// at the origin.
///
/// In one dimension each time slice contributes the exact conditional
/// probability that the bridge between two monitored points leaves
/// `(−r, r)`, `exp(−2(r∓a)(r∓b)/Δs)` per barrier, so the estimator carries
/// no discrete-monitoring bias. For `d ≥ 2` the maximum over the sampled
/// points is used, which underestimates the tail by an `O(√Δs)` shift of `r`.
pub fn bessel_tail(r: f64, t: f64, dim: usize, params: &McParams) -> Result<McEstimate> {
    if !(t > 0.0) || params.slices < 2 || params.n_samples < 2 || dim == 0 {
        return Err(Error::InvalidArgument("bessel_tail needs t > 0, slices ≥ 2, n_samples ≥ 2, d ≥ 1".into()));
    }
    let meta = McMeta { t, edge: None, shift: vec![0.0; dim], seed: params.seed };
    if r <= 0.0 {
        return Ok(McEstimate {
            mean: 1.0,
            std_error: 0.0,
            n_samples: params.n_samples,
            m_slices: params.slices,
            meta,
        });
    }
    let m = params.slices;
    let dt = t / m as f64;
    let n_blocks = params.n_samples.div_ceil(BLOCK_SIZE);
    let blocks: Vec<Stats> = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut stats = Stats::default();
            let mut shape = vec![0.0; (m + 1) * dim];
            let mut queue = VecDeque::new();
            let start = block * BLOCK_SIZE;
            let end = (start + BLOCK_SIZE).min(params.n_samples);
            for path_index in start..end {
                let mut rng = rng_for(BridgeSeed { master: params.seed, stream: path_index as u64 });
                fill_bridge_shape(&mut rng, dim, t, m, &mut shape, &mut queue);
                let value = if dim == 1 {
                    let mut stay = 1.0;
                    for k in 0..m {
                        let (a, b) = (shape[k], shape[k + 1]);
                        if a.abs() >= r || b.abs() >= r {
                            stay = 0.0;
                            break;
                        }
                        let up = (-2.0 * (r - a) * (r - b) / dt).exp();
                        let down = (-2.0 * (r + a) * (r + b) / dt).exp();
                        stay *= (1.0 - up) * (1.0 - down);
                    }
                    1.0 - stay
                } else {
                    let exceeded = shape.chunks_exact(dim).any(|x| x.iter().map(|v| v * v).sum::<f64>() > r * r);
                    if exceeded {
                        1.0
                    } else {
                        0.0
                    }
                };
                stats.push(value);
            }
            stats
        })
        .collect();
    let mut total = Stats::default();
    for b in &blocks {
        total.merge(b);
    }
    Ok(McEstimate { mean: total.mean, std_error: total.std_error(), n_samples: params.n_samples, m_slices: m, meta })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BhlProbe {
    pub estimates: Vec<McEstimate>,
    /// Largest estimate over the probed points.
    pub sup_estimate: f64,
    /// `exp(t · max(0, −inf U))`.
    pub analytic_bound: f64,
}

/// `max_x E_{x,x}[e^{−∫U}]` over the probed points, one coupled path set.
pub fn bhl_bound_probe(field: &PotentialField, t: f64, points: &[Vec<f64>], params: &McParams) -> Result<BhlProbe> {
    validate_params(t, params)?;
    let d = field.dim();
    if points.iter().any(|x| x.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: points.iter().map(|x| x.len()).find(|l| *l != d).unwrap_or(d),
        });
    }
    let m = params.slices;
    let dt = t / m as f64;
    let offsets: Vec<f64> = points.iter().flatten().copied().collect();
    let n_blocks = params.n_samples.div_ceil(BLOCK_SIZE);
    let blocks: Vec<Vec<Stats>> = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut stats = vec![Stats::default(); points.len()];
            let mut shape = vec![0.0; (m + 1) * d];
            let mut queue = VecDeque::new();
            let mut integ = OffsetIntegrator::new(field, d, offsets.clone());
            let start = block * BLOCK_SIZE;
            let end = (start + BLOCK_SIZE).min(params.n_samples);
            for path_index in start..end {
                let mut rng = rng_for(BridgeSeed { master: params.seed, stream: path_index as u64 });
                fill_bridge_shape(&mut rng, d, t, m, &mut shape, &mut queue);
                integ.prepare(&shape, m, dt);
                for (j, s) in stats.iter_mut().enumerate() {
                    s.push((-integ.integral(j, &shape, m, dt)).exp());
                }
            }
            stats
        })
        .collect();
    let mut totals = vec![Stats::default(); points.len()];
    for b in &blocks {
        for (tot, s) in totals.iter_mut().zip(b) {
            tot.merge(s);
        }
    }
    let estimates: Vec<McEstimate> = totals
        .iter()
        .zip(points)
        .map(|(s, x)| McEstimate {
            mean: s.mean,
            std_error: s.std_error(),
            n_samples: params.n_samples,
            m_slices: m,
            meta: McMeta { t, edge: None, shift: x.clone(), seed: params.seed },
        })
        .collect();
    let sup_estimate = estimates.iter().map(|e| e.mean).fold(f64::NEG_INFINITY, f64::max);
    let analytic_bound = (t * (-field.lower_bound()).max(0.0)).exp();
    Ok(BhlProbe { estimates, sup_estimate, analytic_bound })
}
