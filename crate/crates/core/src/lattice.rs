//! Dirichlet grids, potentials and the finite-volume operators built from them.
//!
//! A box `Λ_L = ]-L/2, L/2[^d` is discretized by a uniform grid of mesh `h`
//! whose points are strictly interior; the Dirichlet condition is carried by
//! simply omitting couplings to the (implicit, zero) boundary values. The
//! operator is the second-order central-difference version of `-Δ/2 + U + V`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform interior grid on `]-L/2, L/2[^d`.
///
/// Points are ordered with axis 0 varying fastest, so neighbors along axis
/// `j` are `n^j` apart in the flat index and the half-bandwidth of an
/// assembled operator is `n^(d-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    dim: usize,
    edge: f64,
    mesh: f64,
    n_per_axis: usize,
}

impl GridSpec {
    pub fn new(dim: usize, edge: f64, mesh: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if !(edge.is_finite() && edge > 0.0) {
            return Err(Error::InvalidGrid(format!("edge length {edge} must be positive")));
        }
        if !(mesh.is_finite() && mesh > 0.0) {
            return Err(Error::InvalidGrid(format!("mesh width {mesh} must be positive")));
        }
        let ratio = edge / mesh;
        let cells = ratio.round();
        if cells < 2.0 {
            return Err(Error::BoxTooSmall { edge, mesh });
        }
        if (ratio - cells).abs() > 1e-9 * cells {
            return Err(Error::InvalidGrid(format!("edge {edge} is not a multiple of the mesh width {mesh}")));
        }
        let n_per_axis = cells as usize - 1;
        let total = (n_per_axis as u128).checked_pow(dim as u32);
        if total.is_none_or(|t| t > usize::MAX as u128) {
            return Err(Error::InvalidGrid("grid too large".into()));
        }
        Ok(Self { dim, edge, mesh, n_per_axis })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn edge(&self) -> f64 {
        self.edge
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn n_per_axis(&self) -> usize {
        self.n_per_axis
    }

    /// Total number of interior points, `n_per_axis^d`.
    pub fn len(&self) -> usize {
        self.n_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinate of the `i`-th interior point along any axis (0-based).
    pub fn coordinate(&self, i: usize) -> f64 {
        -0.5 * self.edge + (i + 1) as f64 * self.mesh
    }

    /// Per-axis indices of a flat index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let n = self.n_per_axis;
        (0..self.dim)
            .map(|_| {
                let i = flat % n;
                flat /= n;
                i
            })
            .collect()
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).into_iter().map(|i| self.coordinate(i)).collect()
    }

    /// Writes the coordinates of `flat` into `out` without allocating.
    pub fn point_into(&self, mut flat: usize, out: &mut [f64]) {
        let n = self.n_per_axis;
        for x in out.iter_mut().take(self.dim) {
            *x = self.coordinate(flat % n);
            flat /= n;
        }
    }

    /// Same box and mesh: operators on such grids can be compared entrywise.
    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.dim == other.dim
            && self.n_per_axis == other.n_per_axis
            && self.edge == other.edge
            && self.mesh == other.mesh
    }
}

pub fn build_grid(dim: usize, edge: f64, mesh: f64) -> Result<GridSpec> {
    GridSpec::new(dim, edge, mesh)
}

/// Axis-aligned open cube `Λ_side(center)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cube {
    pub center: Vec<f64>,
    pub side: f64,
}

impl Cube {
    pub fn centered(dim: usize, side: f64) -> Self {
        Self { center: vec![0.0; dim], side }
    }

    pub fn new(center: Vec<f64>, side: f64) -> Self {
        Self { center, side }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let half = 0.5 * self.side;
        self.center.iter().zip(x).all(|(c, xi)| (xi - c).abs() < half)
    }

    pub fn lower(&self, axis: usize) -> f64 {
        self.center[axis] - 0.5 * self.side
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.center[axis] + 0.5 * self.side
    }
}

/// Closed-form profile of a periodic background `U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackgroundProfile {
    Zero,
    Constant {
        value: f64,
    },
    /// `scale · Π_j (c_0 + Σ_{k≥1} c_k cos(2πk x_j / p_j))`.
    CosineSeries {
        scale: f64,
        coefficients: Vec<f64>,
    },
}

/// Closed-form profile of a compactly supported perturbation `V`, before
/// scaling to the support cube `Λ_ℓ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PerturbationProfile {
    /// `amplitude` inside `Λ_ℓ`; on a face the indicator takes the value 1/2
    /// per face coordinate, the symmetric a.e.-equivalent representative.
    BoxIndicator { amplitude: f64 },
    /// `amplitude · Π_j exp(1 − 1/(1 − u_j²))`, `u_j = 2 x_j / ℓ`.
    Bump { amplitude: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum PotentialField {
    Background { profile: BackgroundProfile, period: Vec<f64> },
    Perturbation { profile: PerturbationProfile, ell: f64, shift: Vec<f64> },
}

/// One term `coefficient · exp(2πi Σ_j n_j x_j / p_j)` of a background.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierTerm {
    pub frequencies: Vec<i32>,
    pub coefficient: f64,
}

const FACE_TOL: f64 = 1e-9;

fn indicator_factor(offset: f64, half: f64) -> f64 {
    let gap = offset.abs() - half;
    if gap.abs() <= FACE_TOL * half.max(1.0) {
        0.5
    } else if gap < 0.0 {
        1.0
    } else {
        0.0
    }
}

fn bump_factor(offset: f64, half: f64) -> f64 {
    let u = offset / half;
    let u2 = u * u;
    if u2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u2)).exp()
    }
}

impl PotentialField {
    pub fn zero_background(dim: usize) -> Self {
        Self::Background { profile: BackgroundProfile::Zero, period: vec![1.0; dim] }
    }

    /// `W ≡ value` on all of `ℝ^d`, usable wherever a bounded field is.
    pub fn constant(dim: usize, value: f64) -> Self {
        Self::Background { profile: BackgroundProfile::Constant { value }, period: vec![1.0; dim] }
    }

    pub fn cosine_series(scale: f64, coefficients: Vec<f64>, period: Vec<f64>) -> Self {
        Self::Background { profile: BackgroundProfile::CosineSeries { scale, coefficients }, period }
    }

    pub fn box_indicator(dim: usize, amplitude: f64, ell: f64) -> Self {
        Self::Perturbation { profile: PerturbationProfile::BoxIndicator { amplitude }, ell, shift: vec![0.0; dim] }
    }

    pub fn bump(dim: usize, amplitude: f64, ell: f64) -> Self {
        Self::Perturbation { profile: PerturbationProfile::Bump { amplitude }, ell, shift: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Background { period, .. } => period.len(),
            Self::Perturbation { shift, .. } => shift.len(),
        }
    }

    pub fn is_background(&self) -> bool {
        matches!(self, Self::Background { .. })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Background { profile, .. } => match profile {
                BackgroundProfile::Zero => true,
                BackgroundProfile::Constant { value } => *value == 0.0,
                BackgroundProfile::CosineSeries { scale, coefficients } => {
                    *scale == 0.0 || coefficients.iter().all(|c| *c == 0.0)
                }
            },
            Self::Perturbation { profile, .. } => match profile {
                PerturbationProfile::BoxIndicator { amplitude } | PerturbationProfile::Bump { amplitude } => {
                    *amplitude == 0.0
                }
            },
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Self::Background { profile, period } => match profile {
                BackgroundProfile::Zero => 0.0,
                BackgroundProfile::Constant { value } => *value,
                BackgroundProfile::CosineSeries { scale, coefficients } => {
                    let mut acc = *scale;
                    for (xj, pj) in x.iter().zip(period) {
                        let theta = std::f64::consts::TAU * xj / pj;
                        let mut factor = coefficients.first().copied().unwrap_or(0.0);
                        for (k, ck) in coefficients.iter().enumerate().skip(1) {
                            factor += ck * (k as f64 * theta).cos();
                        }
                        acc *= factor;
                    }
                    acc
                }
            },
            Self::Perturbation { profile, ell, shift } => {
                let half = 0.5 * ell;
                match profile {
                    PerturbationProfile::BoxIndicator { amplitude } => {
                        let mut acc = *amplitude;
                        for (xj, cj) in x.iter().zip(shift) {
                            acc *= indicator_factor(xj - cj, half);
                            if acc == 0.0 {
                                break;
                            }
                        }
                        acc
                    }
                    PerturbationProfile::Bump { amplitude } => {
                        let mut acc = *amplitude;
                        for (xj, cj) in x.iter().zip(shift) {
                            acc *= bump_factor(xj - cj, half);
                            if acc == 0.0 {
                                break;
                            }
                        }
                        acc
                    }
                }
            }
        }
    }

    /// Declared bound `M` with `|value(x)| ≤ M` everywhere.
    pub fn bound(&self) -> f64 {
        match self {
            Self::Background { profile, period } => match profile {
                BackgroundProfile::Zero => 0.0,
                BackgroundProfile::Constant { value } => value.abs(),
                BackgroundProfile::CosineSeries { scale, coefficients } => {
                    let per_axis: f64 = coefficients.iter().map(|c| c.abs()).sum();
                    scale.abs() * per_axis.powi(period.len() as i32)
                }
            },
            Self::Perturbation { profile, .. } => match profile {
                PerturbationProfile::BoxIndicator { amplitude } | PerturbationProfile::Bump { amplitude } => {
                    amplitude.abs()
                }
            },
        }
    }

    /// A lower bound for `inf_x value(x)`.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Self::Background { profile: BackgroundProfile::Zero, .. } => 0.0,
            Self::Background { profile: BackgroundProfile::Constant { value }, .. } => *value,
            Self::Background { profile: BackgroundProfile::CosineSeries { scale, coefficients }, .. } => {
                let c0 = coefficients.first().copied().unwrap_or(0.0);
                let rest: f64 = coefficients.iter().skip(1).map(|c| c.abs()).sum();
                if *scale >= 0.0 && c0 >= rest {
                    *scale * (c0 - rest).powi(self.dim() as i32)
                } else {
                    -self.bound()
                }
            }
            Self::Perturbation { profile, .. } => match profile {
                PerturbationProfile::BoxIndicator { amplitude } | PerturbationProfile::Bump { amplitude } => {
                    amplitude.min(0.0)
                }
            },
        }
    }

    /// Support cube of a perturbation (`Λ_ℓ(shift)`), `None` for backgrounds.
    pub fn support(&self) -> Option<Cube> {
        match self {
            Self::Perturbation { ell, shift, .. } => Some(Cube::new(shift.clone(), *ell)),
            Self::Background { .. } => None,
        }
    }

    pub fn period(&self) -> Option<&[f64]> {
        match self {
            Self::Background { period, .. } => Some(period),
            Self::Perturbation { .. } => None,
        }
    }

    /// Complex-exponential expansion of a background; `None` for perturbations.
    /// Coefficients are real and symmetric under `n → -n`.
    pub fn fourier_terms(&self) -> Option<Vec<FourierTerm>> {
        let Self::Background { profile, period } = self else {
            return None;
        };
        let dim = period.len();
        match profile {
            BackgroundProfile::Zero => Some(Vec::new()),
            BackgroundProfile::Constant { value } => {
                Some(vec![FourierTerm { frequencies: vec![0; dim], coefficient: *value }])
            }
            BackgroundProfile::CosineSeries { scale, coefficients } => {
                let k_max = coefficients.len().saturating_sub(1) as i32;
                let axis_coef = |n: i32| -> f64 {
                    let k = n.unsigned_abs() as usize;
                    match (k, coefficients.get(k)) {
                        (0, Some(c)) => *c,
                        (_, Some(c)) => 0.5 * c,
                        _ => 0.0,
                    }
                };
                let width = (2 * k_max + 1) as usize;
                let mut terms = Vec::new();
                for combo in 0..width.pow(dim as u32) {
                    let mut rest = combo;
                    let mut freqs = Vec::with_capacity(dim);
                    let mut coef = *scale;
                    for _ in 0..dim {
                        let n = (rest % width) as i32 - k_max;
                        rest /= width;
                        coef *= axis_coef(n);
                        freqs.push(n);
                    }
                    if coef != 0.0 {
                        terms.push(FourierTerm { frequencies: freqs, coefficient: coef });
                    }
                }
                Some(terms)
            }
        }
    }

    /// Short identifier used in operator tags and CSV metadata.
    pub fn tag(&self) -> String {
        match self {
            Self::Background { profile, period } => match profile {
                BackgroundProfile::Zero => "U0".into(),
                BackgroundProfile::Constant { value } => format!("Uconst({value})"),
                BackgroundProfile::CosineSeries { scale, coefficients } => {
                    format!("Ucos({scale};{coefficients:?};p={period:?})")
                }
            },
            Self::Perturbation { profile, ell, shift } => match profile {
                PerturbationProfile::BoxIndicator { amplitude } => format!("Vbox({amplitude};l={ell};y={shift:?})"),
                PerturbationProfile::Bump { amplitude } => format!("Vbump({amplitude};l={ell};y={shift:?})"),
            },
        }
    }
}

/// `V_y = V(· − y)`; the support cube moves to `Λ_ℓ(y + old shift)`.
pub fn shift_potential(field: &PotentialField, y: &[f64]) -> Result<PotentialField> {
    match field {
        PotentialField::Background { .. } => Err(Error::NotAPerturbation),
        PotentialField::Perturbation { profile, ell, shift } => {
            if y.len() != shift.len() {
                return Err(Error::DimensionMismatch { expected: shift.len(), got: y.len() });
            }
            Ok(PotentialField::Perturbation {
                profile: profile.clone(),
                ell: *ell,
                shift: shift.iter().zip(y).map(|(s, yi)| s + yi).collect(),
            })
        }
    }
}

/// Compressed-row sparse matrix. Column indices are sorted within a row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0; n + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        Self { n, indptr, indices, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.indptr[i]..self.indptr[i + 1];
        self.indices[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.indptr[i]..self.indptr[i + 1];
        match self.indices[range.clone()].binary_search(&j) {
            Ok(pos) => self.values[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// Largest `|i - j|` over stored entries.
    pub fn half_bandwidth(&self) -> usize {
        (0..self.n).flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j))).max().unwrap_or(0)
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Gershgorin enclosure `[min_i (a_ii − r_i), max_i (a_ii + r_i)]`.
    pub fn gershgorin(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..self.n {
            let mut diag = 0.0;
            let mut radius = 0.0;
            for (j, v) in self.row(i) {
                if j == i {
                    diag = v;
                } else {
                    radius += v.abs();
                }
            }
            lo = lo.min(diag - radius);
            hi = hi.max(diag + radius);
        }
        (lo, hi)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        out
    }
}

/// Anything counted by the eigenvalue machinery: a symmetric sparse matrix.
pub trait SymmetricOperator {
    fn matrix(&self) -> &CsrMatrix;
}

impl SymmetricOperator for CsrMatrix {
    fn matrix(&self) -> &CsrMatrix {
        self
    }
}

/// Finite-difference `-Δ/2 + U + V` on a Dirichlet grid.
#[derive(Clone, Debug)]
pub struct DirichletOperator {
    pub grid: GridSpec,
    pub matrix: CsrMatrix,
    pub potential_tag: String,
}

impl SymmetricOperator for DirichletOperator {
    fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
}

impl DirichletOperator {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

pub fn assemble_operator(
    grid: &GridSpec,
    background: Option<&PotentialField>,
    perturbation: Option<&PotentialField>,
) -> Result<DirichletOperator> {
    for field in [background, perturbation].into_iter().flatten() {
        if field.dim() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), got: field.dim() });
        }
    }
    let d = grid.dim();
    let n = grid.n_per_axis();
    let h2 = grid.mesh() * grid.mesh();
    let diag0 = d as f64 / h2;
    let off = -0.5 / h2;
    let total = grid.len();

    let mut triplets = Vec::with_capacity(total * (2 * d + 1));
    let mut x = vec![0.0; d];
    for flat in 0..total {
        grid.point_into(flat, &mut x);
        let mut w = 0.0;
        for field in [background, perturbation].into_iter().flatten() {
            w += field.value(&x);
        }
        if !w.is_finite() {
            return Err(Error::NonFinitePotential { index: flat, value: w });
        }
        triplets.push((flat, flat, diag0 + w));
        let mut stride = 1;
        let mut rest = flat;
        for _ in 0..d {
            let i = rest % n;
            rest /= n;
            if i > 0 {
                triplets.push((flat, flat - stride, off));
            }
            if i + 1 < n {
                triplets.push((flat, flat + stride, off));
            }
            stride *= n;
        }
    }

    let tag = match (background, perturbation) {
        (None, None) => "free".to_string(),
        (Some(u), None) => u.tag(),
        (None, Some(v)) => v.tag(),
        (Some(u), Some(v)) => format!("{}+{}", u.tag(), v.tag()),
    };
    Ok(DirichletOperator { grid: grid.clone(), matrix: CsrMatrix::from_triplets(total, triplets), potential_tag: tag })
}

/// Security distance `D(L)` keeping shifted supports away from `∂Λ_L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SecurityDistance {
    /// `½ log(L − ℓ + 1)`.
    LogHalf,
    /// `fraction · (L − ℓ)/2`, `0 ≤ fraction ≤ 1`.
    LinearFraction { fraction: f64 },
}

impl SecurityDistance {
    pub fn eval(&self, edge: f64, ell: f64) -> f64 {
        match self {
            Self::LogHalf => 0.5 * (edge - ell + 1.0).ln(),
            Self::LinearFraction { fraction } => fraction * 0.5 * (edge - ell),
        }
    }
}

/// Lattice translates `x0 + pℤ^d` whose `ℓ`-cube keeps distance `> D(L)`
/// from the complement of `Λ_L`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftSet {
    pub x0: Vec<f64>,
    pub period: Vec<f64>,
    pub edge: f64,
    pub ell: f64,
    pub security_distance: f64,
    pub multi_indices: Vec<Vec<i64>>,
    pub shifts: Vec<Vec<f64>>,
}

impl ShiftSet {
    pub fn len(&self) -> usize {
        self.shifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shifts.is_empty()
    }

    /// Membership up to a small coordinate tolerance.
    pub fn contains(&self, y: &[f64]) -> bool {
        self.shifts.iter().any(|s| s.iter().zip(y).all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs())))
    }
}

/// Euclidean distance from `Λ_ℓ(y)` to `ℝ^d \ Λ_L` (zero if not contained).
pub fn distance_to_complement(y: &[f64], ell: f64, edge: f64) -> f64 {
    y.iter().map(|yj| 0.5 * edge - yj.abs() - 0.5 * ell).fold(f64::INFINITY, f64::min).max(0.0)
}

pub fn allowed_shifts(
    x0: &[f64],
    edge: f64,
    period: &[f64],
    ell: f64,
    security: impl Fn(f64) -> f64,
) -> Result<ShiftSet> {
    let d = x0.len();
    if period.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: period.len() });
    }
    if !(ell > 0.0) || !(edge >= ell) {
        return Err(Error::InvalidArgument(format!("need 0 < ell <= L, got ell={ell}, L={edge}")));
    }
    if period.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::InvalidArgument("periods must be positive".into()));
    }
    if x0.iter().zip(period).any(|(x, p)| !(*x >= 0.0 && x < p)) {
        return Err(Error::BasePointOutsideCell(x0.to_vec()));
    }
    let dist = security(edge);
    let max = 0.5 * (edge - ell);
    if !dist.is_finite() || dist < 0.0 || dist > max {
        return Err(Error::InvalidSecurityDistance { edge, value: dist, max });
    }

    // |y_j| < L/2 − ℓ/2 − D on every axis
    let reach = 0.5 * edge - 0.5 * ell - dist;
    let ranges: Vec<(i64, i64)> = x0
        .iter()
        .zip(period)
        .map(|(x, p)| (((-reach - x) / p).floor() as i64, ((reach - x) / p).ceil() as i64))
        .collect();

    let mut multi_indices = Vec::new();
    let mut shifts = Vec::new();
    let mut k: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    if reach > 0.0 {
        'outer: loop {
            let y: Vec<f64> = k.iter().zip(x0).zip(period).map(|((ki, x), p)| x + *ki as f64 * p).collect();
            if distance_to_complement(&y, ell, edge) > dist && y.iter().all(|yj| yj.abs() < reach) {
                multi_indices.push(k.clone());
                shifts.push(y);
            }
            // odometer with the last axis varying fastest (lexicographic order)
            for axis in (0..d).rev() {
                if k[axis] < ranges[axis].1 {
                    k[axis] += 1;
                    continue 'outer;
                }
                k[axis] = ranges[axis].0;
            }
            break;
        }
    }
    Ok(ShiftSet { x0: x0.to_vec(), period: period.to_vec(), edge, ell, security_distance: dist, multi_indices, shifts })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let g = build_grid(1, 4.0, 1.0).unwrap();
        assert_eq!(g.n_per_axis(), 3);
        let pts: Vec<f64> = (0..g.len()).map(|i| g.point(i)[0]).collect();
        assert_eq!(pts, vec![-1.0, 0.0, 1.0]);

        let g = build_grid(2, 2.0, 0.5).unwrap();
        assert_eq!(g.n_per_axis(), 3);
        assert_eq!(g.len(), 9);

        assert!(matches!(build_grid(1, 1.0, 0.8), Err(Error::BoxTooSmall { .. })));
        assert!(matches!(build_grid(1, 4.1, 1.0), Err(Error::InvalidGrid(_))));
        assert!(build_grid(0, 1.0, 0.1).is_err());
    }

    #[test]
    fn grid_points_are_interior() {
        let g = build_grid(3, 3.0, 0.25).unwrap();
        for flat in 0..g.len() {
            assert!(g.point(flat).iter().all(|x| x.abs() < 1.5));
        }
    }

    #[test]
    fn shift_examples() {
        let v = PotentialField::box_indicator(2, 1.0, 1.0);
        let same = shift_potential(&v, &[0.0, 0.0]).unwrap();
        assert_eq!(same, v);
        let moved = shift_potential(&v, &[2.0, 0.0]).unwrap();
        assert_eq!(moved.value(&[2.0, 0.0]), 1.0);
        assert_eq!(moved.value(&[0.0, 0.0]), 0.0);
        assert_eq!(moved.support().unwrap().center, vec![2.0, 0.0]);

        let u = PotentialField::zero_background(2);
        assert_eq!(shift_potential(&u, &[1.0, 0.0]), Err(Error::NotAPerturbation));
    }

    #[test]
    fn indicator_faces_take_half_values() {
        let v = PotentialField::box_indicator(2, 2.0, 1.0);
        assert_eq!(v.value(&[0.0, 0.0]), 2.0);
        assert_eq!(v.value(&[0.5, 0.0]), 1.0);
        assert_eq!(v.value(&[0.5, -0.5]), 0.5);
        assert_eq!(v.value(&[0.51, 0.0]), 0.0);
    }

    #[test]
    fn free_stencil_d2() {
        let g = build_grid(2, 4.0, 1.0).unwrap();
        let op = assemble_operator(&g, None, None).unwrap();
        assert!(op.matrix.diagonal().iter().all(|&v| v == 2.0));
        for i in 0..op.dim() {
            for (j, v) in op.matrix.row(i) {
                if i != j {
                    assert_eq!(v, -0.5);
                }
            }
        }
    }

    #[test]
    fn free_stencil_d1_is_half_tridiag() {
        let g = build_grid(1, 4.0, 1.0).unwrap();
        let op = assemble_operator(&g, None, None).unwrap();
        let dense = op.matrix.to_dense();
        assert_eq!(dense, vec![vec![1.0, -0.5, 0.0], vec![-0.5, 1.0, -0.5], vec![0.0, -0.5, 1.0]]);
    }

    #[test]
    fn no_wraparound_couplings() {
        let g = build_grid(2, 5.0, 1.0).unwrap();
        let op = assemble_operator(&g, None, None).unwrap();
        let n = g.n_per_axis();
        // last point of row 0 and first point of row 1 are not neighbors
        assert_eq!(op.matrix.get(n - 1, n), 0.0);
        assert!(op.matrix.is_symmetric());
        // each interior pair appears exactly once per direction
        let off = (0..op.dim()).map(|i| op.matrix.row(i).filter(|(j, _)| *j != i).count()).sum::<usize>();
        assert_eq!(off, 2 * 2 * n * (n - 1));
    }

    #[test]
    fn indicator_raises_interior_diagonals() {
        let g = build_grid(1, 6.0, 0.3).unwrap();
        let v = PotentialField::box_indicator(1, 1.0, 1.0);
        let op0 = assemble_operator(&g, None, None).unwrap();
        let op1 = assemble_operator(&g, None, Some(&v)).unwrap();
        for (i, (a, b)) in op0.matrix.diagonal().iter().zip(op1.matrix.diagonal()).enumerate() {
            let x = g.point(i)[0];
            let expected = if x.abs() < 0.5 { 1.0 } else { 0.0 };
            assert!((b - a - expected).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn rejects_non_finite_potential() {
        let g = build_grid(1, 4.0, 1.0).unwrap();
        let u = PotentialField::constant(1, f64::NAN);
        assert!(matches!(assemble_operator(&g, Some(&u), None), Err(Error::NonFinitePotential { .. })));
    }

    #[test]
    fn allowed_shift_example() {
        let set = allowed_shifts(&[0.0], 10.0, &[1.0], 1.0, |_| 2.0).unwrap();
        assert_eq!(set.shifts, vec![vec![-2.0], vec![-1.0], vec![0.0], vec![1.0], vec![2.0]]);
    }

    #[test]
    fn allowed_shifts_at_maximal_distance() {
        // D = (L − ℓ)/2 leaves no room for the strict inequality
        let set = allowed_shifts(&[0.0], 10.0, &[1.0], 1.0, |l| 0.5 * (l - 1.0)).unwrap();
        assert!(set.is_empty());
        assert!(matches!(
            allowed_shifts(&[0.0], 10.0, &[1.0], 1.0, |_| 5.0),
            Err(Error::InvalidSecurityDistance { .. })
        ));
        assert!(matches!(allowed_shifts(&[1.0], 10.0, &[1.0], 1.0, |_| 1.0), Err(Error::BasePointOutsideCell(_))));
    }

    #[test]
    fn allowed_shifts_brute_force_d2() {
        let x0 = [0.25, 0.5];
        let p = [1.0, 1.5];
        let (edge, ell) = (12.0, 1.0);
        let dist = SecurityDistance::LogHalf.eval(edge, ell);
        let set = allowed_shifts(&x0, edge, &p, ell, |l| SecurityDistance::LogHalf.eval(l, ell)).unwrap();
        let mut expected = Vec::new();
        for i in -20i64..=20 {
            for j in -20i64..=20 {
                let y = [x0[0] + i as f64 * p[0], x0[1] + j as f64 * p[1]];
                let gap = y.iter().map(|c| 6.0 - c.abs() - 0.5).fold(f64::INFINITY, f64::min);
                if gap > dist {
                    expected.push(vec![i, j]);
                }
            }
        }
        assert_eq!(set.multi_indices, expected);
    }

    #[test]
    fn shift_count_growth() {
        let ell = 1.0;
        for edge in [20.0, 40.0, 80.0] {
            let set = allowed_shifts(&[0.0, 0.0], edge, &[1.0, 1.0], ell, |l| SecurityDistance::LogHalf.eval(l, ell))
                .unwrap();
            let d = SecurityDistance::LogHalf.eval(edge, ell);
            let predicted = (edge - 2.0 * d - ell).powi(2);
            let ratio = set.len() as f64 / predicted;
            assert!((0.8..1.25).contains(&ratio), "L={edge}: {} vs {predicted}", set.len());
        }
    }

    #[test]
    fn fourier_terms_reproduce_values() {
        let u = PotentialField::cosine_series(0.5, vec![1.0, 1.0, 0.25], vec![1.0, 2.0]);
        let terms = u.fourier_terms().unwrap();
        for x in [[0.1, 0.7], [-1.3, 2.2], [0.0, 0.0]] {
            let series: f64 = terms
                .iter()
                .map(|t| {
                    let theta: f64 = t
                        .frequencies
                        .iter()
                        .zip(&x)
                        .zip([1.0, 2.0])
                        .map(|((n, xi), p)| std::f64::consts::TAU * *n as f64 * xi / p)
                        .sum();
                    t.coefficient * theta.cos()
                })
                .sum();
            assert!((series - u.value(&x)).abs() < 1e-12);
        }
    }
}
