//! Scenario configuration (TOML).

use serde::{Deserialize, Serialize};
use ssf_core::bridge_mc::{LaplaceScenario, McParams};
use ssf_core::lattice::{PotentialField, SecurityDistance};
use ssf_core::ssf::{WeightFactor, WeightFunction};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Parse(String),
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.to_string(), message: message.into() }
}

/// Periodic background `U`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BackgroundSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `scale · Π_j (c₀ + Σ_k c_k cos(2πk x_j / p_j))`.
    CosineSeries {
        scale: f64,
        coefficients: Vec<f64>,
        period: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    BoxIndicator,
    Bump,
}

/// Compactly supported perturbation `V`, centered at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub amplitude: f64,
    pub ell: f64,
    /// `+1` or `−1`, multiplies the amplitude.
    #[serde(default = "plus_one")]
    pub sign: f64,
}

fn plus_one() -> f64 {
    1.0
}

/// Interval `I` of the weight `f = χ_I g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyInterval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    pub n_samples: usize,
    /// Time slices; `64·⌈t⌉` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trunc_radius: Option<f64>,
    /// Spacing of the spatial quadrature; `h` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial_step: Option<f64>,
}

/// Parameters of the running-maximum scan of `ξ_L(E)`.
#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KirschSpec {
    pub d: usize,
    pub h: f64,
    pub L: Vec<f64>,
    /// Fixed energy; when absent, just above the densest free cluster at
    /// the largest `L` within `cluster_range`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    pub cluster_range: [f64; 2],
    pub cluster_window: f64,
}

/// Tolerances of the Laplace-vs-weighted consistency check in `shift-uniformity`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencySpec {
    /// Largest admissible Laplace-space sup deviation at the largest `L`.
    pub tol_laplace: f64,
    /// Largest admissible weighted-SSF sup deviation at the largest `L`.
    pub tol_weighted: f64,
    /// Interval endpoints are kept this many probe cells away from jumps.
    pub clear_cells: usize,
    /// Each endpoint moves by at most this fraction of `|I|`.
    pub max_move_fraction: f64,
}

impl Default for ConsistencySpec {
    fn default() -> Self {
        Self { tol_laplace: 1e-3, tol_weighted: 0.05, clear_cells: 10, max_move_fraction: 0.05 }
    }
}

#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub d: usize,
    pub h: f64,
    pub x0: Vec<f64>,
    pub L: Vec<f64>,
    pub delta: Vec<f64>,
    pub t: Vec<f64>,
    pub oracle_cap: usize,
    /// Energies for `count` and `delta-avg`.
    pub energies: Vec<f64>,
    /// Probe points for sampled curves when the dense oracle is too large.
    pub probe_points: usize,
    pub U: BackgroundSpec,
    pub V: PerturbationSpec,
    pub D: SecurityDistance,
    pub I: EnergyInterval,
    pub g: WeightFactor,
    pub mc: McSpec,
    pub kirsch: KirschSpec,
    #[serde(default)]
    pub consistency: ConsistencySpec,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<(Self, String), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Ok((Self::from_toml(&text)?, text))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    /// Checks every precondition that does not need a computation.
    pub fn check(&self) -> Result<(), ConfigError> {
        let d = self.d;
        if d == 0 {
            return Err(invalid("d", "dimension must be at least 1"));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(invalid("h", "mesh width must be positive"));
        }
        if self.x0.len() != d {
            return Err(invalid("x0", format!("expected {d} coordinates, got {}", self.x0.len())));
        }
        ascending_positive("L", &self.L)?;
        multiples_of("L", &self.L, self.h)?;
        ascending_positive("delta", &self.delta)?;
        ascending_positive("t", &self.t)?;
        if self.energies.iter().any(|e| !e.is_finite()) {
            return Err(invalid("energies", "energies must be finite"));
        }
        let c = &self.consistency;
        if !(c.tol_laplace > 0.0 && c.tol_weighted > 0.0) {
            return Err(invalid("consistency", "tolerances must be positive"));
        }
        if !(c.max_move_fraction >= 0.0 && c.max_move_fraction < 0.5) {
            return Err(invalid("consistency.max_move_fraction", "must lie in [0, 0.5)"));
        }
        if self.probe_points < 2 {
            return Err(invalid("probe_points", "need at least 2 probe points"));
        }
        if let BackgroundSpec::CosineSeries { coefficients, period, .. } = &self.U {
            if coefficients.is_empty() {
                return Err(invalid("U.coefficients", "need at least one coefficient"));
            }
            if period.len() != d || period.iter().any(|p| !(*p > 0.0)) {
                return Err(invalid("U.period", format!("expected {d} positive periods")));
            }
            // translates by whole periods then sample U identically on the grid
            multiples_of("U.period", period, self.h)?;
        }
        let period = self.period();
        if self.x0.iter().zip(&period).any(|(x, p)| !(*x >= 0.0 && x < p)) {
            return Err(invalid("x0", "base point must lie in the period cell [0, p)"));
        }
        if !(self.V.ell > 0.0) {
            return Err(invalid("V.ell", "support edge must be positive"));
        }
        if self.V.sign != 1.0 && self.V.sign != -1.0 {
            return Err(invalid("V.sign", "sign must be 1 or -1"));
        }
        if !self.V.amplitude.is_finite() {
            return Err(invalid("V.amplitude", "amplitude must be finite"));
        }
        if let Some(l) = self.L.iter().find(|l| **l <= self.V.ell) {
            return Err(invalid("L", format!("edge {l} does not exceed the support edge {}", self.V.ell)));
        }
        if let SecurityDistance::LinearFraction { fraction } = self.D {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(invalid("D.fraction", "fraction must lie in (0, 1)"));
            }
        }
        if !(self.I.lo < self.I.hi) {
            return Err(invalid("I", "need lo < hi"));
        }
        if self.mc.n_samples < 2 {
            return Err(invalid("mc.n_samples", "need at least 2 samples"));
        }
        if self.mc.m.is_some_and(|m| m < 2) {
            return Err(invalid("mc.m", "need at least 2 slices"));
        }
        if self.mc.trunc_radius.is_some_and(|r| !(r > 0.0)) {
            return Err(invalid("mc.trunc_radius", "radius must be positive"));
        }
        if self.mc.spatial_step.is_some_and(|s| !(s > 0.0)) {
            return Err(invalid("mc.spatial_step", "step must be positive"));
        }
        let k = &self.kirsch;
        if k.d == 0 || !(k.h > 0.0) {
            return Err(invalid("kirsch", "need d ≥ 1 and h > 0"));
        }
        ascending_positive("kirsch.L", &k.L)?;
        multiples_of("kirsch.L", &k.L, k.h)?;
        if !(k.cluster_range[0] < k.cluster_range[1]) || !(k.cluster_window > 0.0) {
            return Err(invalid("kirsch.cluster_range", "need lo < hi and a positive window"));
        }
        Ok(())
    }

    pub fn period(&self) -> Vec<f64> {
        match &self.U {
            BackgroundSpec::CosineSeries { period, .. } => period.clone(),
            _ => vec![1.0; self.d],
        }
    }

    pub fn background(&self) -> PotentialField {
        self.background_in(self.d)
    }

    /// The configured background in another dimension, reusing the first
    /// period on every axis.
    pub fn background_in(&self, dim: usize) -> PotentialField {
        match &self.U {
            BackgroundSpec::Zero => PotentialField::zero_background(dim),
            BackgroundSpec::Constant { value } => PotentialField::constant(dim, *value),
            BackgroundSpec::CosineSeries { scale, coefficients, period } => {
                let period = if period.len() == dim { period.clone() } else { vec![period[0]; dim] };
                PotentialField::cosine_series(*scale, coefficients.clone(), period)
            }
        }
    }

    pub fn perturbation_in(&self, dim: usize) -> PotentialField {
        let amplitude = self.V.sign * self.V.amplitude;
        match self.V.kind {
            PerturbationKind::BoxIndicator => PotentialField::box_indicator(dim, amplitude, self.V.ell),
            PerturbationKind::Bump => PotentialField::bump(dim, amplitude, self.V.ell),
        }
    }

    pub fn perturbation(&self) -> PotentialField {
        self.perturbation_in(self.d)
    }

    pub fn weight(&self) -> WeightFunction {
        WeightFunction::new(self.I.lo, self.I.hi, self.g.clone()).expect("checked at parse time")
    }

    pub fn laplace_scenario(&self) -> ssf_core::Result<LaplaceScenario> {
        LaplaceScenario::new(self.background(), self.perturbation(), self.x0.clone(), self.D.clone())
    }

    pub fn mc_params(&self, t: f64) -> McParams {
        McParams {
            n_samples: self.mc.n_samples,
            slices: self.mc.m.unwrap_or_else(|| McParams::default_slices(t)),
            seed: self.mc.seed,
            trunc_radius: self.mc.trunc_radius,
            spatial_step: self.mc.spatial_step.unwrap_or(self.h),
        }
    }
}

fn multiples_of(field: &str, values: &[f64], mesh: f64) -> Result<(), ConfigError> {
    match values.iter().find(|v| ((*v / mesh) - (*v / mesh).round()).abs() > 1e-9 * (*v / mesh).abs().max(1.0)) {
        Some(v) => Err(invalid(field, format!("{v} is not a multiple of h = {mesh}"))),
        None => Ok(()),
    }
}

fn ascending_positive(field: &str, values: &[f64]) -> Result<(), ConfigError> {
    if values.is_empty() {
        return Err(invalid(field, "list must not be empty"));
    }
    if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(invalid(field, "values must be positive"));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(field, "values must be strictly ascending"));
    }
    Ok(())
}

/// Shipped one-dimensional scenario.
pub const DEFAULT_1D: &str = include_str!("../configs/default-1d.toml");
/// Shipped two-dimensional scenario.
pub const DEFAULT_2D: &str = include_str!("../configs/default-2d.toml");

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_configs_parse_and_round_trip() {
        for text in [DEFAULT_1D, DEFAULT_2D] {
            let cfg = ScenarioConfig::from_toml(text).unwrap();
            let again = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
            assert_eq!(cfg, again);
        }
    }

    #[test]
    fn diagnostics_name_the_field() {
        let bad = DEFAULT_1D.replace("x0 = [0.0]", "x0 = [0.0, 1.0]");
        match ScenarioConfig::from_toml(&bad) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "x0"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = DEFAULT_1D.replace("[V]", "[V]\nunknown = 1");
        let err = ScenarioConfig::from_toml(&bad).unwrap_err().to_string();
        assert!(err.contains("unknown"), "{err}");
        assert!(err.contains("line"), "{err}");
        let bad = DEFAULT_1D.replace("L = [12.0,", "L = [12.1,");
        match ScenarioConfig::from_toml(&bad) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "L"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = ScenarioConfig::from_toml(DEFAULT_1D).unwrap();
        let p = cfg.mc_params(1.0);
        assert_eq!(p.spatial_step, cfg.mc.spatial_step.unwrap_or(cfg.h));
        assert!(cfg.perturbation().support().is_some());
    }
}
