//! Command-line driver: configuration, subcommands, acceptance suite and
//! output files.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;
pub mod validate;

use std::path::Path;

use commands::{Command, Outcome};
use config::ScenarioConfig;
use manifest::{file_entry, sha256_hex, Manifest};

/// Process exit status.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Runs `command`, writes its tables, timings and manifest to `out`, and
/// returns the exit status.
pub fn execute(command: Command, cfg: &ScenarioConfig, out: &Path) -> anyhow::Result<i32> {
    std::fs::create_dir_all(out)?;
    let config_text = cfg.to_toml();
    let mut manifest = Manifest {
        command: command.name().to_string(),
        config_sha256: sha256_hex(config_text.as_bytes()),
        seed: cfg.mc.seed,
        oracle_cap: cfg.oracle_cap,
        ssf_cli_version: env!("CARGO_PKG_VERSION").to_string(),
        ssf_core_version: ssf_core::VERSION.to_string(),
        partial: false,
        messages: Vec::new(),
        files: Vec::new(),
        config: config_text,
    };
    let outcome = match commands::run(command, cfg) {
        Ok(o) => o,
        Err(err) => {
            manifest.partial = true;
            manifest.messages.push(format!("error: {err:#}"));
            manifest.write(out)?;
            eprintln!("error: {err:#}");
            return Ok(EXIT_FAILURE);
        }
    };
    let Outcome { tables, failed, messages, timings } = outcome;
    for table in &tables {
        let path = table.write(out)?;
        manifest.files.push(file_entry(&path)?);
    }
    for m in &messages {
        println!("{m}");
    }
    let mut over_budget = false;
    if !timings.is_empty() {
        let mut text = String::new();
        for (label, secs, budget) in &timings {
            let flag = if secs > budget { "  OVER BUDGET" } else { "" };
            over_budget |= secs > budget;
            text.push_str(&format!("{label}: {secs:.2} s (budget {budget:.0} s){flag}\n"));
        }
        eprint!("{text}");
        std::fs::write(out.join("timings.txt"), text)?;
    }
    manifest.messages = messages;
    manifest.write(out)?;
    Ok(if failed || over_budget { EXIT_FAILURE } else { EXIT_OK })
}
