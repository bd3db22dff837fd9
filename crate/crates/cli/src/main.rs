use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ssf_cli::commands::Command;
use ssf_cli::config::{ScenarioConfig, DEFAULT_1D};
use ssf_cli::{execute, EXIT_CONFIG, EXIT_FAILURE};

#[derive(Parser)]
#[command(name = "ssf", version, about = "Finite-volume spectral shift function experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Scenario file (TOML); the shipped one-dimensional scenario if absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; affects speed only.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Largest dimension handed to the dense eigensolver.
    #[arg(long, global = true)]
    oracle_cap: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Dense spectra of H0 and H1.
    Spectrum,
    /// Eigenvalue counts at the configured energies.
    Count,
    /// Spectral shift function curves.
    Ssf,
    /// Energy-averaged SSF against the box length.
    #[command(name = "sweep-L")]
    SweepL,
    /// Delta-averages next to averaged SSF divided by delta.
    DeltaAvg,
    /// Running maximum of the SSF at a fixed energy.
    Kirsch,
    /// Running means of the averaged SSF over the box lengths.
    Cesaro,
    /// Deviations over all allowed shifts, counting and Laplace space.
    ShiftUniformity,
    /// Monte Carlo Laplace transforms with the trace oracle.
    McLaplace,
    /// Acceptance suite.
    Validate,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Spectrum => Command::Spectrum,
            Cmd::Count => Command::Count,
            Cmd::Ssf => Command::Ssf,
            Cmd::SweepL => Command::SweepL,
            Cmd::DeltaAvg => Command::DeltaAvg,
            Cmd::Kirsch => Command::Kirsch,
            Cmd::Cesaro => Command::Cesaro,
            Cmd::ShiftUniformity => Command::ShiftUniformity,
            Cmd::McLaplace => Command::McLaplace,
            Cmd::Validate => Command::Validate,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let loaded = match &cli.config {
        Some(path) => ScenarioConfig::load(path).map(|(cfg, _)| cfg),
        None => ScenarioConfig::from_toml(DEFAULT_1D),
    };
    let mut cfg = match loaded {
        Ok(cfg) => cfg,
        Err(err) => {
            eprintln!("config error: {err}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.mc.seed = seed;
    }
    if let Some(cap) = cli.oracle_cap {
        cfg.oracle_cap = cap;
    }
    if let Some(threads) = cli.threads {
        if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global() {
            eprintln!("cannot set up {threads} threads: {err}");
            return ExitCode::from(EXIT_FAILURE as u8);
        }
    }
    match execute(cli.command.into(), &cfg, &cli.out) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_FAILURE as u8)
        }
    }
}
