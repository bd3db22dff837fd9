//! Acceptance suite: criteria 1–10 on the shipped scenario.
//!
//! Statuses in `validate.csv` depend only on the numbers; wall-clock times
//! go to the outcome's timings and are checked against the budgets there.

use std::time::Instant;

use anyhow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssf_core::bridge_mc::{bessel_tail, bridge_max_tail_series, finite_volume_laplace_mc, trace_laplace_oracle};
use ssf_core::eigencount::{count_leq, default_zero_tol, dense_spectrum, relative_count, spectrum_count};
use ssf_core::lattice::{assemble_operator, build_grid, PotentialField};
use ssf_core::ssf::{averaged_ssf, delta_average, ssf_curve, Probe, SsfCurve, WeightFunction};

use crate::commands::{averaged_at, kirsch_energy, kirsch_scan, laplace_shift_study, operator_pair, Outcome};
use crate::config::{ScenarioConfig, DEFAULT_1D};
use crate::output::Table;
use crate::row;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Reported for context; does not affect the exit status.
    Info,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pass => "PASS",
            Self::Fail => "FAIL",
            Self::Info => "INFO",
        }
    }

    fn of(ok: bool) -> Self {
        if ok {
            Self::Pass
        } else {
            Self::Fail
        }
    }
}

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: String,
    pub name: &'static str,
    pub status: Status,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

struct Suite {
    results: Vec<CriterionResult>,
    tables: Vec<Table>,
    timings: Vec<(String, f64, f64)>,
}

impl Suite {
    fn record(&mut self, r: CriterionResult) {
        self.results.push(r);
    }
}

/// Seeds for the randomized checks, derived from the configured seed.
const STREAM_INERTIA: u64 = 1;
const STREAM_DELTA: u64 = 6;
const STREAM_TRACE: u64 = 8;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The one-dimensional scenario the criteria refer to: the configuration
/// itself when it is one-dimensional, otherwise the shipped default with the
/// configured seed.
fn default_scenario(cfg: &ScenarioConfig) -> Result<ScenarioConfig> {
    if cfg.d == 1 {
        return Ok(cfg.clone());
    }
    let mut base = ScenarioConfig::from_toml(DEFAULT_1D)?;
    base.mc.seed = cfg.mc.seed;
    base.oracle_cap = cfg.oracle_cap;
    Ok(base)
}

pub fn validate(cfg: &ScenarioConfig) -> Result<Outcome> {
    let base = default_scenario(cfg)?;
    let mut suite = Suite { results: Vec::new(), tables: Vec::new(), timings: Vec::new() };
    type Check = fn(&ScenarioConfig, &mut Suite) -> Result<()>;
    let checks: [(&str, f64, Check); 10] = [
        ("1", 60.0, inertia_oracle),
        ("2", 60.0, closed_form_1d),
        ("3", 60.0, sign_and_rank),
        ("4", 600.0, kirsch),
        ("5", 600.0, theorem_one_trend),
        ("6", 60.0, delta_identity),
        ("7", 900.0, mc_trace),
        ("8", 60.0, trace_curve),
        ("9", 300.0, bessel),
        ("10", 1800.0, shift_uniformity),
    ];
    for (id, budget, check) in checks {
        let start = Instant::now();
        check(&base, &mut suite)?;
        let secs = start.elapsed().as_secs_f64();
        suite.timings.push((format!("criterion {id}"), secs, budget));
    }

    let mut summary = Table::new("validate", &["criterion", "name", "status", "value", "threshold", "detail"]);
    for r in &suite.results {
        summary.push(row![r.id.clone(), r.name, r.status.as_str(), r.value, r.threshold, r.detail.clone()]);
    }
    let failed = suite.results.iter().any(|r| r.status == Status::Fail);
    let mut tables = vec![summary];
    tables.append(&mut suite.tables);
    let messages = suite
        .results
        .iter()
        .map(|r| format!("criterion {:<3} {}  {}  [{}]", r.id, r.status.as_str(), r.name, r.detail))
        .collect();
    Ok(Outcome { tables, failed, messages, timings: suite.timings })
}

fn inertia_oracle(cfg: &ScenarioConfig, suite: &mut Suite) -> Result<()> {
    let mut rng = rng_for(cfg.mc.seed, STREAM_INERTIA);
    let (mut compared, mut skipped, mut mismatches) = (0usize, 0usize, 0usize);
    let mut attempt = 0usize;
    while compared < 200 && attempt < 2000 {
        let dim = 1 + attempt % 2;
        attempt += 1;
        let mesh = 1.0 / rng.random_range(2..=8) as f64;
        let n = if dim == 1 { rng.random_range(3..=400) } else { rng.random_range(2..=20) };
        let edge = (n + 1) as f64 * mesh;
        let grid = build_grid(dim, edge, mesh)?;
        let u = PotentialField::cosine_series(
            rng.random_range(0.0..2.0),
            vec![1.0, rng.random_range(-1.0..1.0)],
            vec![rng.random_range(0.5..2.0); dim],
        );
        let v = PotentialField::box_indicator(dim, rng.random_range(-4.0..4.0), rng.random_range(0.2..0.5) * edge);
        let op = assemble_operator(&grid, Some(&u), Some(&v))?;
        let (lo, hi) = op.matrix.gershgorin();
        let energy = rng.random_range(lo..hi);
        let spectrum = dense_spectrum(&op, cfg.oracle_cap)?;
        let tol = default_zero_tol(&op.matrix);
        if spectrum.iter().any(|l| (l - energy).abs() <= tol) {
            skipped += 1;
            continue;
        }
        compared += 1;
        if count_leq(&op, energy)?.count != spectrum_count(&spectrum, energy) {
            mismatches += 1;
        }
    }
    suite.record(CriterionResult {
        id: "1".into(),
        name: "inertia-oracle exactness",
        status: Status::of(compared >= 200 && mismatches == 0),
        value: mismatches as f64,
        threshold: 0.0,
        detail: format!("{compared} pairs compared, {skipped} near-coincident skipped, {mismatches} mismatches"),
    });
    Ok(())
}

fn closed_form_1d(_cfg: &ScenarioConfig, suite: &mut Suite) -> Result<()> {
    let mesh = 0.125;
    let mut mismatches = 0usize;
    let mut total = 0usize;
    for n in [3usize, 10, 100] {
        let grid = build_grid(1, (n + 1) as f64 * mesh, mesh)?;
        let op = assemble_operator(&grid, None, None)?;
        let thresholds: Vec<f64> =
            (1..=n).map(|k| (1.0 - (k as f64 * std::f64::consts::PI / (n + 1) as f64).cos()) / (mesh * mesh)).collect();
        let top = 2.0 / (mesh * mesh);
        for j in 0..50 {
            let e = -0.5 + (j as f64 + 0.37) / 50.0 * (top + 1.0);
            let expected = thresholds.iter().filter(|&&l| l <= e).count();
            total += 1;
            if count_leq(&op, e)?.count != expected {
                mismatches += 1;
            }
        }
    }
    suite.record(CriterionResult {
        id: "2".into(),
        name: "closed-form 1D counting",
        status: Status::of(mismatches == 0),
        value: mismatches as f64,
        threshold: 0.0,
        detail: format!("{total} counts, {mismatches} mismatches"),
    });
    Ok(())
}

fn sign_and_rank(cfg: &ScenarioConfig, suite: &mut Suite) -> Result<()> {
    let cases: [(usize, f64, &[f64], bool); 4] = [
        (1, 0.125, &[6.0, 10.0, 16.0], false),
        (1, 0.125, &[6.0, 10.0, 16.0], true),
        (2, 0.25, &[4.0, 6.0], false),
        (2, 0.25, &[4.0, 6.0], true),
    ];
    let (mut probes, mut violations) = (0usize, 0usize);
    for (dim, mesh, edges, bump) in cases {
        let u = cfg.background_in(dim);
        let v = if bump { PotentialField::bump(dim, 2.0, 1.0) } else { PotentialField::box_indicator(dim, 2.0, 1.0) };
        for &edge in edges {
            let grid = build_grid(dim, edge, mesh)?;
            let op0 = assemble_operator(&grid, Some(&u), None)?;
            let op1 = assemble_operator(&grid, Some(&u), Some(&v))?;
            let rank = (0..grid.len()).filter(|&i| v.value(&grid.point(i)) != 0.0).count() as i64;
            let (lo, _) = op0.matrix.gershgorin();
            let (_, hi) = op1.matrix.gershgorin();
            for j in 0..40 {
                let e = lo + (j as f64 + 0.5) / 40.0 * (hi - lo);
                let xi = relative_count(&op1, &op0, e)?.value;
                probes += 1;
                if xi < 0 || xi > rank {
                    violations += 1;
                }
            }
        }
    }
    suite.record(CriterionResult {
        id: "3".into(),
        name: "SSF sign and rank bound",
        status: Status::of(violations == 0),
        value: violations as f64,
        threshold: 0.0,
        detail: format!("{probes} probes, {violations} violations"),
    });
    Ok(())
}

fn kirsch(cfg: &ScenarioConfig, suite: &mut Suite) -> Result<()> {
    let mut kcfg = cfg.clone();
    kcfg.kirsch.d = 2;
    kcfg.kirsch.h = 0.25;
    kcfg.kirsch.L = (8..=40).map(f64::from).collect();
    kcfg.V.kind = crate::config::PerturbationKind::BoxIndicator;
    kcfg.V.amplitude = 2.0;
    kcfg.V.sign = 1.0;
    kcfg.V.ell = 1.0;
    let (energy, cluster) = kirsch_energy(&kcfg)?;
    let two = kirsch_scan(&kcfg, 2, energy)?;
    let one = kirsch_scan(&kcfg, 1, energy)?;
    let mut table = Table::new("validate_kirsch", &["d", "L", "energy", "xi", "running_max"]);
    for (dim, rows) in [(2usize, &two), (1, &one)] {
        for r in rows.iter() {
            table.push(row![dim, r.edge, energy, r.value, r.running_max]);
        }
    }
    suite.tables.push(table);
    let mut increasing: Vec<i64> = two.iter().map(|r| r.running_max).collect();
    increasing.dedup();
    let mid = 0.5 * (8.0 + 40.0);
    let tail: Vec<i64> = one.iter().filter(|r| r.edge >= mid).map(|r| r.running_max).collect();
    let plateau = tail.first() == tail.last();
    let cluster_note =
        cluster.map(|c| format!(", cluster of {} at [{:.6}, {:.6}]", c.multiplicity, c.lo, c.hi)).unwrap_or_default();
    suite.record(CriterionResult {
        id: "4".into(),
        name: "Kirsch mechanism",
        status: Status::of(increasing.len() >= 3 && plateau),
        value: increasing.len() as f64,
        threshold: 3.0,
        detail: format!(
            "E = {energy:.9}{cluster_note}; d=2 running max values {increasing:?}; d=1 running max over L >= {mid}: {:?} ({})",
            tail.first().zip(tail.last()),
            if plateau { "plateau" } else { "increasing" }
        ),
    });
    Ok(())
}

fn theorem_one_trend(cfg: &ScenarioConfig, suite: &mut Suite) -> Result<()> {
    let mut c = cfg.clone();
    c.h = 0.125;
    let f = WeightFunction::indicator(0.0, 4.0)?;
    let edges = [12.0, 16.0, 24.0, 32.0, 48.0];
    let mut values = Vec::new();
    let mut table = Table::new("validate_sweep", &["L", "average", "mode"]);
    for &edge in &edges {
        let (a, mode) = averaged_at(&c, edge, &c.x0, &f)?;
        table.push(row![edge, a.value, mode]);
        values.push(a.value);
    }
    suite.tables.push(table);
    let gaps: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let ratio = gaps[2].max(gaps[3]) / gaps[0];
    suite.record(CriterionResult {
        id: "5".into(),
        name: "averaged SSF gap trend",
        status: Status::of(ratio <= 0.5),
        value: ratio,
        threshold: 0.5,
        detail: format!("gaps [{}]", gaps.iter().map(|g| format!("{g:.6}")).collect::<Vec<_>>().join(", ")),
    });
    Ok(())
}

fn default_curve(cfg: &ScenarioConfig, edge: f64, mesh: f64) -> Result<SsfCurve> {
    let (op1, op0) = operator_pair(1, edge, mesh, &cfg.background_in(1), &cfg.perturbation_in(1), &cfg.x0)?;
    Ok(ssf_curve(&op1, &op0, &Probe::Exact, cfg.oracle_cap)?)
}

fn delta_identity(cfg: &ScenarioConfig, suite: &mut Suite) -> Result<()> {
    let curve = default_curve(cfg, 16.0, 0.125)?;
    let mut rng = rng_for(cfg.mc.seed, STREAM_DELTA);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let e = rng.random_range(-0.5..6.0);
        let delta = rng.random_range(1e-3..2.0);
        let direct = delta_average(&curve, e, delta)?;
        let via = averaged_ssf(&curve, &WeightFunction::indicator(e, e + delta)?)?.value / delta;
        worst = worst.max((direct - via).abs());
    }
    suite.record(CriterionResult {
        id: "6".into(),
        name: "delta-average identity",
        status: Status::of(worst <= 1e-12),
        value: worst,
        threshold: 1e-12,
        detail: "100 random (E, delta)".into(),
    });
    Ok(())
}

fn mc_trace(cfg: &ScenarioConfig, suite: &mut Suite) -> Result<()> {
    let scenario = cfg.laplace_scenario()?;
    let (edge, mesh) = (16.0, 0.125);
    let (op1, op0) = operator_pair(1, edge, mesh, &cfg.background(), &cfg.perturbation(), &cfg.x0)?;
    let (op1f, op0f) = operator_pair(1, edge, 0.5 * mesh, &cfg.background(), &cfg.perturbation(), &cfg.x0)?;
    let mut table = Table::new(
        "validate_mc",
        &["t", "m", "mc_mean", "mc_std_error", "oracle_h", "oracle_h_half", "oracle_extrapolated"],
    );
    let mut ok = true;
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    let mut info_ok = true;
    let mut info_worst = 0.0f64;
    for t in [0.5, 1.0] {
        let mut params = cfg.mc_params(t);
        params.n_samples = 100_000;
        params.slices = 128;
        let coarse = finite_volume_laplace_mc(&scenario, edge, &cfg.x0, t, &params)?.estimate;
        params.slices = 256;
        let fine = finite_volume_laplace_mc(&scenario, edge, &cfg.x0, t, &params)?.estimate;
        let oracle = trace_laplace_oracle(&op1, &op0, t, cfg.oracle_cap)?.xi_tilde;
        let oracle_half = trace_laplace_oracle(&op1f, &op0f, t, cfg.oracle_cap)?.xi_tilde;
        let extrapolated = (4.0 * oracle_half - oracle) / 3.0;
        for e in [&coarse, &fine] {
            table.push(row![t, e.m_slices, e.mean, e.std_error, oracle, oracle_half, extrapolated]);
        }
        let sigma = coarse.std_error;
        let refinement = (fine.mean - coarse.mean).abs();
        let z = (coarse.mean - oracle).abs() / sigma;
        let z_info = (coarse.mean - extrapolated).abs() / sigma;
        ok &= refinement < sigma && z <= 3.0;
        info_ok &= z_info <= 3.0;
        worst = worst.max(z);
        info_worst = info_worst.max(z_info);
        details.push(format!(
            "t={t}: mc {:.6} +- {:.1e}, oracle {:.6}, |m256-m128| {:.1e}, z {:.1}",
            coarse.mean, sigma, oracle, refinement, z
        ));
    }
    suite.tables.push(table);
    suite.record(CriterionResult {
        id: "7".into(),
        name: "MC-trace agreement",
        status: Status::of(ok),
        value: worst,
        threshold: 3.0,
        detail: details.join("; "),
    });
    suite.record(CriterionResult {
        id: "7b".into(),
        name: "MC vs mesh-extrapolated trace",
        status: Status::Info,
        value: info_worst,
        threshold: 3.0,
        detail: format!(
            "oracle extrapolated in h from h and h/2; {} within 3 sigma",
            if info_ok { "all" } else { "not all" }
        ),
    });
    Ok(())
}

fn trace_curve(cfg: &ScenarioConfig, suite: &mut Suite) -> Result<()> {
    let mut rng = rng_for(cfg.mc.seed, STREAM_TRACE);
    let mut worst = 0.0f64;
    for i in 0..10 {
        let dim = if i < 8 { 1 } else { 2 };
        let mesh = if dim == 1 { 0.125 } else { 0.25 };
        let edge = rng.random_range(3..=8) as f64;
        let u = PotentialField::cosine_series(rng.random_range(0.0..1.5), vec![1.0, 1.0], vec![1.0; dim]);
        let v = PotentialField::box_indicator(dim, rng.random_range(-3.0..3.0), 1.0);
        let origin = vec![0.0; dim];
        let (op1, op0) = operator_pair(dim, edge, mesh, &u, &v, &origin)?;
        let t = rng.random_range(0.1..4.0);
        let oracle = trace_laplace_oracle(&op1, &op0, t, cfg.oracle_cap)?.xi_tilde;
        let SsfCurve::Exact(curve) = ssf_curve(&op1, &op0, &Probe::Exact, cfg.oracle_cap)? else {
            unreachable!("exact probe gives an exact curve")
        };
        worst = worst.max((oracle - curve.laplace_transform(t)).abs());
    }
    suite.record(CriterionResult {
        id: "8".into(),
        name: "trace/curve identity",
        status: Status::of(worst <= 1e-10),
        value: worst,
        threshold: 1e-10,
        detail: "10 instances".into(),
    });
    Ok(())
}

fn bessel(cfg: &ScenarioConfig, suite: &mut Suite) -> Result<()> {
    let mut params = cfg.mc_params(1.0);
    params.n_samples = 100_000;
    params.slices = 512;
    let mut table = Table::new("validate_bessel", &["r", "mc_mean", "mc_std_error", "series"]);
    let mut worst = 0.0f64;
    for r in [0.5, 1.0, 1.5] {
        let est = bessel_tail(r, 1.0, 1, &params)?;
        let series = bridge_max_tail_series(r, 1.0);
        table.push(row![r, est.mean, est.std_error, series]);
        worst = worst.max((est.mean - series).abs() / est.std_error);
    }
    suite.tables.push(table);
    suite.record(CriterionResult {
        id: "9".into(),
        name: "bridge maximum tail",
        status: Status::of(worst <= 3.0),
        value: worst,
        threshold: 3.0,
        detail: "max |mc - series| / sigma over r in {0.5, 1, 1.5}".into(),
    });
    Ok(())
}

fn shift_uniformity(cfg: &ScenarioConfig, suite: &mut Suite) -> Result<()> {
    let mut c = cfg.clone();
    c.D = ssf_core::lattice::SecurityDistance::LogHalf;
    let edges = [16.0, 24.0, 32.0, 48.0];
    let (study, inf_mean, inf_se) = laplace_shift_study(&c, &edges, 1.0)?;
    let mut table = Table::new(
        "validate_shift_profile",
        &["L", "n_shifts", "sup_deviation", "sup_std_error", "spread", "infinite_mean", "infinite_std_error"],
    );
    for p in &study.profile {
        table.push(row![p.edge, p.n_shifts, p.sup_deviation, p.sup_std_error, p.spread, inf_mean, inf_se]);
    }
    suite.tables.push(table);
    let mut worst_excess = f64::NEG_INFINITY;
    for w in study.profile.windows(2) {
        let band = 3.0 * (w[0].sup_std_error.powi(2) + w[1].sup_std_error.powi(2)).sqrt();
        worst_excess = worst_excess.max(w[1].sup_deviation - w[0].sup_deviation - band);
    }
    let first = &study.profile[0];
    let last = study.profile.last().expect("non-empty");
    let ok = worst_excess <= 0.0 && last.spread <= first.spread;
    suite.record(CriterionResult {
        id: "10".into(),
        name: "shift uniformity",
        status: Status::of(ok),
        value: worst_excess,
        threshold: 0.0,
        detail: format!(
            "sup deviations [{}]; spread L=16 {:.3e}, L=48 {:.3e}",
            study.profile.iter().map(|p| format!("{:.3e}", p.sup_deviation)).collect::<Vec<_>>().join(", "),
            first.spread,
            last.spread
        ),
    });
    Ok(())
}
