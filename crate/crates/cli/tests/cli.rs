use std::path::Path;
use std::process::{Command, Output};

use ssf_cli::config::{ScenarioConfig, DEFAULT_1D};

fn small_config(edit: impl FnOnce(&mut ScenarioConfig)) -> String {
    let mut cfg = ScenarioConfig::from_toml(DEFAULT_1D).unwrap();
    cfg.L = vec![8.0, 12.0];
    cfg.t = vec![0.5];
    cfg.probe_points = 60;
    cfg.mc.n_samples = 1024;
    cfg.mc.m = Some(16);
    edit(&mut cfg);
    cfg.to_toml()
}

fn ssf(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_ssf"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn zero_perturbation_gives_zero_ssf() {
    let dir = tempfile::tempdir().unwrap();
    let out = ssf(dir.path(), &small_config(|c| c.V.amplitude = 0.0), &["ssf"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("out/ssf.csv"));
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[3] == "0"));
    assert!(read_csv(&dir.path().join("out/ssf_jumps.csv")).is_empty());
}

#[test]
fn bad_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = ssf(dir.path(), &small_config(|c| c.h = -0.1), &["count"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains('h'));

    let out = ssf(dir.path(), "d = 1\nbogus = 3\n", &["count"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_override_reaches_the_manifest_and_changes_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(|_| {});
    let first = ssf(dir.path(), &cfg, &["mc-laplace", "--seed", "5"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let manifest = std::fs::read_to_string(dir.path().join("out/manifest.toml")).unwrap();
    assert!(manifest.contains("seed = 5"));
    let a = std::fs::read_to_string(dir.path().join("out/mc_laplace.csv")).unwrap();

    let again = ssf(dir.path(), &cfg, &["mc-laplace", "--seed", "5"]);
    assert!(again.status.success());
    assert_eq!(a, std::fs::read_to_string(dir.path().join("out/mc_laplace.csv")).unwrap());

    let other = ssf(dir.path(), &cfg, &["mc-laplace", "--seed", "6"]);
    assert!(other.status.success());
    assert_ne!(a, std::fs::read_to_string(dir.path().join("out/mc_laplace.csv")).unwrap());
}

#[test]
fn manifest_lists_every_output_with_its_hash() {
    let dir = tempfile::tempdir().unwrap();
    let out = ssf(dir.path(), &small_config(|_| {}), &["sweep-L"]);
    assert!(out.status.success());
    let manifest: toml::Value =
        toml::from_str(&std::fs::read_to_string(dir.path().join("out/manifest.toml")).unwrap()).unwrap();
    assert_eq!(manifest["command"].as_str(), Some("sweep-L"));
    assert_eq!(manifest["partial"].as_bool(), Some(false));
    let files = manifest["files"].as_array().unwrap();
    assert!(!files.is_empty());
    for f in files {
        let name = f["name"].as_str().unwrap();
        let bytes = std::fs::read(dir.path().join("out").join(name)).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), ssf_cli::manifest::sha256_hex(&bytes));
    }
    // the embedded effective config parses back to the same scenario
    let embedded = ScenarioConfig::from_toml(manifest["config"].as_str().unwrap()).unwrap();
    assert_eq!(embedded.L, vec![8.0, 12.0]);
}

#[test]
fn standard_scenario_shift_consistency_passes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ScenarioConfig::from_toml(DEFAULT_1D).unwrap();
    cfg.L = vec![12.0, 16.0, 24.0, 32.0];
    let out = ssf(dir.path(), &cfg.to_toml(), &["shift-uniformity"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("out/shift_consistency.csv"));
    assert!(rows.iter().all(|r| r[7] == "pass"), "{rows:?}");
    // the interval must stay essentially I, not collapse below the spectrum
    let counting: Vec<_> = rows.iter().filter(|r| r[0] == "counting").collect();
    let hi: f64 = counting[0][6].parse().unwrap();
    assert!(hi > 3.5);
    assert!(counting.iter().any(|r| r[3].parse::<f64>().unwrap() > 0.0));
}
