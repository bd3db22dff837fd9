//! Subcommands. Each returns its tables; the caller writes them.

use anyhow::{bail, Result};
use rayon::prelude::*;
use ssf_core::bridge_mc::{
    default_trunc_radius, frame_box, laplace_mc_regions, trace_laplace_oracle, truncation_tail_bound,
    TRUNCATION_TAIL_TARGET,
};
use ssf_core::eigencount::{count_leq, dense_spectrum, Count};
use ssf_core::laplace_convergence::{
    clear_endpoints, laplace_vs_weighted_consistency, uniformity_profile, IndexedFamily,
};
use ssf_core::lattice::{assemble_operator, build_grid, shift_potential, Cube, DirichletOperator, PotentialField};
use ssf_core::ssf::{
    averaged_ssf, cesaro_mean, delta_average, free_cluster, ssf_curve, sup_scan, uniform_probe, Averaged, CurveMeta,
    ExactCurve, FreeCluster, Probe, SampledCurve, SsfCurve, SupScanRow, WeightFunction,
};

use crate::config::ScenarioConfig;
use crate::output::{fmt_point, Table};
use crate::row;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    Count,
    Ssf,
    SweepL,
    DeltaAvg,
    Kirsch,
    Cesaro,
    ShiftUniformity,
    McLaplace,
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::Count => "count",
            Self::Ssf => "ssf",
            Self::SweepL => "sweep-L",
            Self::DeltaAvg => "delta-avg",
            Self::Kirsch => "kirsch",
            Self::Cesaro => "cesaro",
            Self::ShiftUniformity => "shift-uniformity",
            Self::McLaplace => "mc-laplace",
            Self::Validate => "validate",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    /// A validation check failed.
    pub failed: bool,
    pub messages: Vec<String>,
    /// `(label, seconds, budget)`; kept out of the result tables.
    pub timings: Vec<(String, f64, f64)>,
}

impl Outcome {
    fn tables(tables: Vec<Table>) -> Self {
        Self { tables, ..Self::default() }
    }
}

pub fn run(command: Command, cfg: &ScenarioConfig) -> Result<Outcome> {
    match command {
        Command::Spectrum => spectrum(cfg).map(|t| Outcome::tables(vec![t])),
        Command::Count => count(cfg).map(|t| Outcome::tables(vec![t])),
        Command::Ssf => ssf(cfg).map(Outcome::tables),
        Command::SweepL => sweep_l(cfg).map(|t| Outcome::tables(vec![t])),
        Command::DeltaAvg => delta_avg(cfg).map(|t| Outcome::tables(vec![t])),
        Command::Kirsch => kirsch(cfg).map(|t| Outcome::tables(vec![t])),
        Command::Cesaro => cesaro(cfg).map(|t| Outcome::tables(vec![t])),
        Command::ShiftUniformity => shift_uniformity(cfg),
        Command::McLaplace => mc_laplace(cfg),
        Command::Validate => crate::validate::validate(cfg),
    }
}

/// `(H₁, H₀)` on `Λ_L` with the perturbation moved to `shift`.
pub fn operator_pair(
    dim: usize,
    edge: f64,
    mesh: f64,
    background: &PotentialField,
    perturbation: &PotentialField,
    shift: &[f64],
) -> Result<(DirichletOperator, DirichletOperator)> {
    let grid = build_grid(dim, edge, mesh)?;
    let v = shift_potential(perturbation, shift)?;
    Ok((assemble_operator(&grid, Some(background), Some(&v))?, assemble_operator(&grid, Some(background), None)?))
}

/// Exact curve when the dense oracle fits, otherwise sampled on `[lo, hi]`.
pub fn curve_for(
    op1: &DirichletOperator,
    op0: &DirichletOperator,
    cap: usize,
    lo: f64,
    hi: f64,
    probe_points: usize,
) -> Result<SsfCurve> {
    let probe = if op0.dim() <= cap { Probe::Exact } else { Probe::Grid(uniform_probe(lo, hi, probe_points)) };
    Ok(ssf_curve(op1, op0, &probe, cap)?)
}

pub fn mode(curve: &SsfCurve) -> &'static str {
    match curve {
        SsfCurve::Exact(_) => "exact",
        SsfCurve::Sampled(_) => "sampled",
    }
}

fn scenario_pair(cfg: &ScenarioConfig, edge: f64, shift: &[f64]) -> Result<(DirichletOperator, DirichletOperator)> {
    operator_pair(cfg.d, edge, cfg.h, &cfg.background(), &cfg.perturbation(), shift)
}

/// `∫ ξ_L f` for the scenario with the perturbation at `shift`.
pub fn averaged_at(
    cfg: &ScenarioConfig,
    edge: f64,
    shift: &[f64],
    f: &WeightFunction,
) -> Result<(Averaged, &'static str)> {
    let (op1, op0) = scenario_pair(cfg, edge, shift)?;
    let curve = curve_for(&op1, &op0, cfg.oracle_cap, f.lo, f.hi, cfg.probe_points)?;
    Ok((averaged_ssf(&curve, f)?, mode(&curve)))
}

fn spectrum(cfg: &ScenarioConfig) -> Result<Table> {
    let mut table = Table::new("spectrum", &["L", "operator", "index", "eigenvalue"]);
    for &edge in &cfg.L {
        let (op1, op0) = scenario_pair(cfg, edge, &cfg.x0)?;
        for (name, op) in [("h0", &op0), ("h1", &op1)] {
            for (k, lambda) in dense_spectrum(op, cfg.oracle_cap)?.into_iter().enumerate() {
                table.push(row![edge, name, k, lambda]);
            }
        }
    }
    Ok(table)
}

fn count(cfg: &ScenarioConfig) -> Result<Table> {
    let mut table = Table::new("count", &["L", "operator", "energy", "count", "coincident"]);
    for &edge in &cfg.L {
        let (op1, op0) = scenario_pair(cfg, edge, &cfg.x0)?;
        for (name, op) in [("h0", &op0), ("h1", &op1)] {
            for &e in &cfg.energies {
                let c = count_leq(op, e)?;
                table.push(row![edge, name, e, c.count, c.coincident]);
            }
        }
    }
    Ok(table)
}

fn ssf(cfg: &ScenarioConfig) -> Result<Vec<Table>> {
    let mut curve_table = Table::new("ssf", &["L", "mode", "energy", "xi", "coincident"]);
    let mut jumps = Table::new("ssf_jumps", &["L", "energy", "xi_after"]);
    let probe = uniform_probe(cfg.I.lo, cfg.I.hi, cfg.probe_points);
    for &edge in &cfg.L {
        let (op1, op0) = scenario_pair(cfg, edge, &cfg.x0)?;
        let curve = curve_for(&op1, &op0, cfg.oracle_cap, cfg.I.lo, cfg.I.hi, cfg.probe_points)?;
        match &curve {
            SsfCurve::Exact(c) => {
                for &e in &probe {
                    table_push_value(&mut curve_table, edge, "exact", e, c.value_at(e), false);
                }
                for (e, v) in c.breakpoints.iter().zip(&c.values) {
                    jumps.push(row![edge, *e, *v]);
                }
            }
            SsfCurve::Sampled(c) => {
                for ((e, v), coincident) in c.energies.iter().zip(&c.values).zip(&c.coincident) {
                    table_push_value(&mut curve_table, edge, "sampled", *e, *v, *coincident);
                }
            }
        }
    }
    Ok(vec![curve_table, jumps])
}

fn table_push_value(table: &mut Table, edge: f64, mode: &str, energy: f64, xi: i64, coincident: bool) {
    table.push(row![edge, mode, energy, xi, coincident]);
}

/// `A(L) = ∫ ξ_L f` along the configured lengths.
pub fn sweep_values(cfg: &ScenarioConfig, edges: &[f64]) -> Result<Vec<(f64, Averaged, &'static str)>> {
    let f = cfg.weight();
    edges.iter().map(|&edge| averaged_at(cfg, edge, &cfg.x0, &f).map(|(a, m)| (edge, a, m))).collect()
}

fn sweep_l(cfg: &ScenarioConfig) -> Result<Table> {
    let mut table = Table::new("sweep_L", &["L", "average", "error_bound", "mode", "gap"]);
    let mut prev: Option<f64> = None;
    for (edge, a, m) in sweep_values(cfg, &cfg.L)? {
        table.push(row![edge, a.value, a.error_bound, m, prev.map(|p| (a.value - p).abs())]);
        prev = Some(a.value);
    }
    Ok(table)
}

fn delta_avg(cfg: &ScenarioConfig) -> Result<Table> {
    let mut table =
        Table::new("delta_avg", &["L", "energy", "delta", "delta_average", "averaged_over_delta", "abs_difference"]);
    let top = cfg.energies.iter().copied().fold(f64::NEG_INFINITY, f64::max) + cfg.delta.last().copied().unwrap_or(0.0);
    let bottom = cfg.energies.iter().copied().fold(f64::INFINITY, f64::min);
    for &edge in &cfg.L {
        let (op1, op0) = scenario_pair(cfg, edge, &cfg.x0)?;
        let curve = curve_for(&op1, &op0, cfg.oracle_cap, bottom, top, cfg.probe_points)?;
        for &e in &cfg.energies {
            for &delta in &cfg.delta {
                let direct = delta_average(&curve, e, delta)?;
                let via = averaged_ssf(&curve, &WeightFunction::indicator(e, e + delta)?)?.value / delta;
                table.push(row![edge, e, delta, direct, via, (direct - via).abs()]);
            }
        }
    }
    Ok(table)
}

/// Energy for the running-maximum scan: configured, or just above the
/// densest free cluster at the largest length.
pub fn kirsch_energy(cfg: &ScenarioConfig) -> Result<(f64, Option<FreeCluster>)> {
    let k = &cfg.kirsch;
    if let Some(e) = k.energy {
        return Ok((e, None));
    }
    let edge = *k.L.last().expect("checked non-empty");
    let c = free_cluster(k.d, edge, k.h, k.cluster_range[0], k.cluster_range[1], k.cluster_window)?;
    Ok((c.energy, Some(c)))
}

/// `ξ_L(E)` for `U = 0` and the configured perturbation in dimension `dim`.
pub fn kirsch_scan(cfg: &ScenarioConfig, dim: usize, energy: f64) -> Result<Vec<SupScanRow>> {
    let k = &cfg.kirsch;
    let u = PotentialField::zero_background(dim);
    let v = cfg.perturbation_in(dim);
    Ok(sup_scan(energy, &k.L, |edge| {
        let grid = build_grid(dim, edge, k.h)?;
        Ok((assemble_operator(&grid, Some(&u), Some(&v))?, assemble_operator(&grid, Some(&u), None)?))
    })?)
}

fn kirsch(cfg: &ScenarioConfig) -> Result<Table> {
    let (energy, _) = kirsch_energy(cfg)?;
    let mut table = Table::new("kirsch", &["d", "L", "energy", "xi", "running_max", "coincident"]);
    let mut dims = vec![cfg.kirsch.d];
    if cfg.kirsch.d != 1 {
        dims.push(1);
    }
    for dim in dims {
        for r in kirsch_scan(cfg, dim, energy)? {
            table.push(row![dim, r.edge, energy, r.value, r.running_max, r.coincident]);
        }
    }
    Ok(table)
}

fn cesaro(cfg: &ScenarioConfig) -> Result<Table> {
    let values = sweep_values(cfg, &cfg.L)?;
    let means = cesaro_mean(&values.iter().map(|v| v.1.value).collect::<Vec<_>>());
    let mut table = Table::new("cesaro", &["L", "average", "cesaro_mean"]);
    for ((edge, a, _), m) in values.iter().zip(means) {
        table.push(row![*edge, a.value, m]);
    }
    Ok(table)
}

/// Per-shift values and per-length profiles for one space and `t`.
pub struct ShiftStudy {
    pub rows: Vec<ShiftRow>,
    pub profile: Vec<ProfileRow>,
}

pub struct ShiftRow {
    pub edge: f64,
    pub shift: Vec<f64>,
    pub value: f64,
    pub std_error: f64,
    pub deviation: f64,
    pub deviation_std_error: f64,
}

pub struct ProfileRow {
    pub edge: f64,
    pub n_shifts: usize,
    pub sup_deviation: f64,
    /// Standard error of the deviation attaining the sup.
    pub sup_std_error: f64,
    /// `max − min` of the values over shifts.
    pub spread: f64,
}

fn profile_rows(edges: &[f64], rows: &[ShiftRow]) -> Result<Vec<ProfileRow>> {
    let per_edge: Vec<Vec<&ShiftRow>> = edges.iter().map(|e| rows.iter().filter(|r| r.edge == *e).collect()).collect();
    let family = IndexedFamily::new(
        edges.to_vec(),
        per_edge.iter().map(|rs| rs.iter().map(|r| r.deviation).collect()).collect(),
    )?;
    let sups = uniformity_profile(&family, 0.0);
    Ok(per_edge
        .iter()
        .zip(sups)
        .map(|(rs, (edge, sup))| {
            let at_sup = rs.iter().find(|r| r.deviation.abs() == sup).expect("sup is attained");
            let max = rs.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
            let min = rs.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
            ProfileRow {
                edge,
                n_shifts: rs.len(),
                sup_deviation: sup,
                sup_std_error: at_sup.deviation_std_error,
                spread: max - min,
            }
        })
        .collect())
}

/// `H₀` on one box with its counting data, shared by every shift of `V`.
struct Unperturbed {
    op: DirichletOperator,
    /// Dense spectrum when it fits the oracle cap.
    spectrum: Option<Vec<f64>>,
    /// Otherwise counts on the probe grid.
    counts: Vec<Count>,
    probe: Vec<f64>,
}

impl Unperturbed {
    fn new(cfg: &ScenarioConfig, edge: f64, f: &WeightFunction) -> Result<Self> {
        let grid = build_grid(cfg.d, edge, cfg.h)?;
        let op = assemble_operator(&grid, Some(&cfg.background()), None)?;
        if op.dim() <= cfg.oracle_cap {
            let spectrum = Some(dense_spectrum(&op, cfg.oracle_cap)?);
            return Ok(Self { op, spectrum, counts: Vec::new(), probe: Vec::new() });
        }
        let probe = uniform_probe(f.lo, f.hi, cfg.probe_points);
        let counts = probe.par_iter().map(|&e| count_leq(&op, e)).collect::<ssf_core::Result<Vec<_>>>()?;
        Ok(Self { op, spectrum: None, counts, probe })
    }

    /// Same curve as [`curve_for`] with `V` moved to `shift`.
    fn curve(&self, cfg: &ScenarioConfig, shift: &[f64]) -> Result<SsfCurve> {
        let v = shift_potential(&cfg.perturbation(), shift)?;
        let op1 = assemble_operator(&self.op.grid, Some(&cfg.background()), Some(&v))?;
        let meta = CurveMeta::of(&op1);
        if let Some(s0) = &self.spectrum {
            let s1 = dense_spectrum(&op1, cfg.oracle_cap)?;
            return Ok(SsfCurve::Exact(ExactCurve::from_spectra(s0, &s1, meta)));
        }
        let c1 = self.probe.iter().map(|&e| count_leq(&op1, e)).collect::<ssf_core::Result<Vec<_>>>()?;
        Ok(SsfCurve::Sampled(SampledCurve {
            energies: self.probe.clone(),
            values: self.counts.iter().zip(&c1).map(|(a, b)| a.count as i64 - b.count as i64).collect(),
            coincident: self.counts.iter().zip(&c1).map(|(a, b)| a.coincident || b.coincident).collect(),
            meta,
        }))
    }
}

/// Counting space: `∫ ξ_L f` at every allowed shift, against the value at
/// the base point on the largest box.
pub fn counting_shift_study(cfg: &ScenarioConfig, edges: &[f64], f: &WeightFunction) -> Result<ShiftStudy> {
    let scenario = cfg.laplace_scenario()?;
    let mut rows = Vec::new();
    let mut reference = None;
    for &edge in edges.iter().rev() {
        let shifts = scenario.allowed_shifts(edge)?;
        if shifts.is_empty() {
            bail!("no allowed shift at L = {edge}");
        }
        let h0 = Unperturbed::new(cfg, edge, f)?;
        let reference: Averaged = match reference {
            Some(r) => r,
            None => *reference.insert(averaged_ssf(&h0.curve(cfg, &cfg.x0)?, f)?),
        };
        let values = shifts
            .shifts
            .par_iter()
            .map(|y| Ok(averaged_ssf(&h0.curve(cfg, y)?, f)?))
            .collect::<Result<Vec<Averaged>>>()?;
        let mut block: Vec<ShiftRow> = shifts
            .shifts
            .iter()
            .zip(values)
            .map(|(y, a)| ShiftRow {
                edge,
                shift: y.clone(),
                value: a.value,
                std_error: a.error_bound,
                deviation: (a.value - reference.value).abs(),
                deviation_std_error: a.error_bound + reference.error_bound,
            })
            .collect();
        block.append(&mut rows);
        rows = block;
    }
    let profile = profile_rows(edges, &rows)?;
    Ok(ShiftStudy { rows, profile })
}

/// Laplace space: coupled estimates of `ξ̃` at every allowed shift of every
/// length and of the infinite-volume limit, one path set.
pub fn laplace_shift_study(cfg: &ScenarioConfig, edges: &[f64], t: f64) -> Result<(ShiftStudy, f64, f64)> {
    let scenario = cfg.laplace_scenario()?;
    let mut regions: Vec<Option<Cube>> = Vec::new();
    let mut keys = Vec::new();
    for &edge in edges {
        let shifts = scenario.allowed_shifts(edge)?;
        if shifts.is_empty() {
            bail!("no allowed shift at L = {edge}");
        }
        for y in shifts.shifts {
            regions.push(Some(frame_box(edge, &y)));
            keys.push((edge, y));
        }
    }
    regions.push(None);
    let reference = regions.len() - 1;
    let est = laplace_mc_regions(&scenario, t, &cfg.mc_params(t), &regions, reference)?;
    let rows: Vec<ShiftRow> = keys
        .into_iter()
        .zip(&est)
        .map(|((edge, shift), r)| ShiftRow {
            edge,
            shift,
            value: r.estimate.mean,
            std_error: r.estimate.std_error,
            deviation: r.diff_to_reference.mean.abs(),
            deviation_std_error: r.diff_to_reference.std_error,
        })
        .collect();
    let profile = profile_rows(edges, &rows)?;
    let inf = &est[reference].estimate;
    Ok((ShiftStudy { rows, profile }, inf.mean, inf.std_error))
}

fn shift_tables() -> (Table, Table) {
    (
        Table::new(
            "shift_uniformity",
            &["space", "t", "L", "shift", "value", "std_error", "deviation", "deviation_std_error"],
        ),
        Table::new(
            "shift_uniformity_profile",
            &["space", "t", "L", "n_shifts", "sup_deviation", "sup_std_error", "spread"],
        ),
    )
}

fn push_study(rows: &mut Table, profile: &mut Table, space: &str, t: Option<f64>, study: &ShiftStudy) {
    for r in &study.rows {
        rows.push(row![
            space,
            t,
            r.edge,
            fmt_point(&r.shift),
            r.value,
            r.std_error,
            r.deviation,
            r.deviation_std_error
        ]);
    }
    for p in &study.profile {
        profile.push(row![space, t, p.edge, p.n_shifts, p.sup_deviation, p.sup_std_error, p.spread]);
    }
}

/// Energies where the curve changes value.
pub fn curve_jumps(curve: &SsfCurve) -> Vec<f64> {
    match curve {
        SsfCurve::Exact(c) => c.breakpoints.clone(),
        SsfCurve::Sampled(c) => {
            c.energies.windows(2).zip(c.values.windows(2)).filter(|(_, v)| v[0] != v[1]).map(|(e, _)| e[1]).collect()
        }
    }
}

/// `I` with both endpoints moved away from the jumps of the base-point
/// curve on the largest box, with the clearance reached and the one asked for.
pub fn cleared_weight(cfg: &ScenarioConfig) -> Result<(WeightFunction, f64, f64)> {
    let largest = *cfg.L.last().expect("checked non-empty");
    let (op1, op0) = scenario_pair(cfg, largest, &cfg.x0)?;
    let curve = curve_for(&op1, &op0, cfg.oracle_cap, cfg.I.lo, cfg.I.hi, cfg.probe_points)?;
    let width = cfg.I.hi - cfg.I.lo;
    let cell = width / (cfg.probe_points - 1) as f64;
    let c = &cfg.consistency;
    let jumps = curve_jumps(&curve);
    let Some(cleared) = clear_endpoints(cfg.I.lo, cfg.I.hi, &jumps, cell, c.clear_cells, c.max_move_fraction * width)
    else {
        bail!("no sub-interval of I keeps its endpoints clear of jumps");
    };
    let f = WeightFunction::new(cleared.lo, cleared.hi, cfg.g.clone())?;
    Ok((f, cleared.clearance, cell * c.clear_cells as f64))
}

fn deviation_family(edges: &[f64], study: &ShiftStudy) -> Result<IndexedFamily> {
    let values =
        edges.iter().map(|e| study.rows.iter().filter(|r| r.edge == *e).map(|r| r.deviation).collect()).collect();
    Ok(IndexedFamily::new(edges.to_vec(), values)?)
}

fn shift_uniformity(cfg: &ScenarioConfig) -> Result<Outcome> {
    let (mut rows, mut profile) = shift_tables();
    let (f, clearance, wanted) = cleared_weight(cfg)?;
    let counting = counting_shift_study(cfg, &cfg.L, &f)?;
    push_study(&mut rows, &mut profile, "counting", None, &counting);
    let mut laplace = Vec::new();
    for &t in &cfg.t {
        let (study, _, _) = laplace_shift_study(cfg, &cfg.L, t)?;
        push_study(&mut rows, &mut profile, "laplace", Some(t), &study);
        laplace.push(deviation_family(&cfg.L, &study)?);
    }

    // deviations are already taken against the references, so both are 0
    let tol = &cfg.consistency;
    let report = laplace_vs_weighted_consistency(
        &cfg.t,
        &laplace,
        &deviation_family(&cfg.L, &counting)?,
        &vec![0.0; cfg.t.len()],
        0.0,
        tol.tol_laplace,
        tol.tol_weighted,
    )?;
    let verdict = report.verdict.as_str();
    let mut table =
        Table::new("shift_consistency", &["space", "t", "L", "sup_deviation", "tolerance", "lo", "hi", "verdict"]);
    for (t, p) in &report.laplace_profiles {
        for (edge, sup) in p {
            table.push(row!["laplace", *t, *edge, *sup, tol.tol_laplace, None::<f64>, None::<f64>, verdict]);
        }
    }
    for (edge, sup) in &report.weighted_profile {
        table.push(row!["counting", None::<f64>, *edge, *sup, tol.tol_weighted, f.lo, f.hi, verdict]);
    }
    let mut messages = vec![format!("laplace-vs-weighted consistency on [{:.6}, {:.6}]: {verdict}", f.lo, f.hi)];
    if clearance < wanted {
        messages.push(format!(
            "interval endpoints are only {clearance:.3e} from the nearest jump ({wanted:.3e} asked for); jumps too dense"
        ));
    }
    Ok(Outcome { tables: vec![rows, profile, table], messages, ..Outcome::default() })
}

fn mc_laplace(cfg: &ScenarioConfig) -> Result<Outcome> {
    let scenario = cfg.laplace_scenario()?;
    let mut table = Table::new(
        "mc_laplace",
        &["L", "t", "source", "xi_tilde", "std_error", "n_samples", "m_slices", "seed", "trunc_tail_bound"],
    );
    let mut messages = Vec::new();
    let edges: Vec<f64> = cfg
        .L
        .iter()
        .copied()
        .filter(|&edge| scenario.allowed_shifts(edge).map(|s| s.contains(&cfg.x0)).unwrap_or(false))
        .collect();
    for &edge in cfg.L.iter().filter(|e| !edges.contains(e)) {
        messages.push(format!("L = {edge}: base point is not an allowed shift, skipped"));
    }
    for &t in &cfg.t {
        let params = cfg.mc_params(t);
        let mut regions: Vec<Option<Cube>> = edges.iter().map(|&e| Some(frame_box(e, &cfg.x0))).collect();
        regions.push(None);
        let est = laplace_mc_regions(&scenario, t, &params, &regions, regions.len() - 1)?;
        let radius = params.trunc_radius.unwrap_or_else(|| default_trunc_radius(t));
        let tail = truncation_tail_bound(&scenario.background, &scenario.perturbation, t, radius);
        if tail > TRUNCATION_TAIL_TARGET {
            messages.push(format!("t = {t}: truncation tail bound {tail:.3e} exceeds target"));
        }
        let (finite, infinite) = est.split_at(est.len() - 1);
        for (edge, r) in edges.iter().zip(finite) {
            let e = &r.estimate;
            table.push(row![*edge, t, "mc-finite", e.mean, e.std_error, e.n_samples, e.m_slices, e.meta.seed, tail]);
        }
        let e = &infinite[0].estimate;
        table.push(row![
            None::<f64>,
            t,
            "mc-infinite",
            e.mean,
            e.std_error,
            e.n_samples,
            e.m_slices,
            e.meta.seed,
            tail
        ]);
        for &edge in &edges {
            let (op1, op0) = scenario_pair(cfg, edge, &cfg.x0)?;
            if op0.dim() <= cfg.oracle_cap {
                let p = trace_laplace_oracle(&op1, &op0, t, cfg.oracle_cap)?;
                table.push(row![
                    edge,
                    t,
                    "trace-oracle",
                    p.xi_tilde,
                    0.0,
                    None::<usize>,
                    None::<usize>,
                    None::<u64>,
                    None::<f64>
                ]);
            }
        }
    }
    Ok(Outcome { tables: vec![table], messages, ..Outcome::default() })
}
