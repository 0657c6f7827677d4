//! End-to-end checks of the command layer: determinism, output headers and
//! exit-code classification.

use std::fs;
use std::path::Path;

use bessreg::config::RunConfig;
use bessreg_cli::commands;
use bessreg_cli::error::CliError;
use bessreg_cli::{config_hash, output_meta};

fn small_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.corpus.periods = 12;
    cfg.experiment.capacity_mw = 5.0;
    cfg.experiment.gamma_steps = 9;
    cfg
}

fn meta_of(cfg: &RunConfig) -> String {
    output_meta(&cfg.to_toml(), cfg.corpus.seed)
}

#[test]
fn uhat_prints_the_five_default_cases() {
    let cfg = RunConfig::default();
    let mut buf = Vec::new();
    commands::cmd_uhat(&cfg, &meta_of(&cfg), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6); // header + five cases
    assert!(lines[1].contains("11.2"));
    assert!(lines[2].contains("21.9"));
    assert!(lines[3].contains("42.9"));
    // Unit-efficiency rows carry a zero regret bound.
    for row in &lines[1..4] {
        assert!(row.trim_end().ends_with("0.0000"), "row: {row}");
    }
}

#[test]
fn calibrate_twice_produces_identical_bytes() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    let meta = meta_of(&cfg);
    commands::cmd_calibrate(&cfg, &meta, &out1).unwrap();
    commands::cmd_calibrate(&cfg, &meta, &out2).unwrap();
    let a = fs::read(out1.join("gamma_curve.csv")).unwrap();
    let b = fs::read(out2.join("gamma_curve.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn outputs_carry_version_and_config_hash() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let meta = meta_of(&cfg);
    commands::cmd_backtest(&cfg, &meta, dir.path()).unwrap();
    let report = fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let hash = config_hash(&cfg.to_toml());
    let first = report.lines().next().unwrap();
    assert!(first.starts_with("# bessreg "), "header line: {first}");
    assert!(first.contains(&format!("config_sha256={hash}")));
    assert!(first.contains("seed=42"));
    let summary = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert!(summary.contains("total_capacity_mwh"));
}

#[test]
fn simulate_writes_one_trajectory_per_period() {
    let mut cfg = small_config();
    cfg.corpus.periods = 3;
    let dir = tempfile::tempdir().unwrap();
    commands::cmd_simulate(&cfg, &meta_of(&cfg), dir.path()).unwrap();
    for p in 0..3 {
        let path = dir.path().join(format!("trajectory_{p:05}.csv"));
        let text = fs::read_to_string(&path).unwrap();
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("t,r,instruction_mw,dispatch_mw,soc,E_hi_g,E_lo_g"));
        assert_eq!(text.lines().count(), 2 + 1800);
    }
    // The corpus manifest records the generator for reproduction.
    let manifest = fs::read_to_string(dir.path().join("corpus.toml")).unwrap();
    assert!(manifest.contains("[corpus]"));
    assert!(manifest.contains("seed = 42"));
}

#[test]
fn sweep_covers_both_policies() {
    let mut cfg = small_config();
    cfg.corpus.periods = 4;
    cfg.experiment.sweep_capacities_mw = vec![2.0, 8.0];
    let dir = tempfile::tempdir().unwrap();
    commands::cmd_sweep(&cfg, &meta_of(&cfg), dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.matches("proposed").count(), 2);
    assert_eq!(text.matches("simple").count(), 2);
}

#[test]
fn bid_command_emits_nondecreasing_prices() {
    let mut cfg = small_config();
    cfg.corpus.periods = 40;
    let dir = tempfile::tempdir().unwrap();
    commands::cmd_bid(&cfg, &meta_of(&cfg), dir.path()).unwrap();
    let text = fs::read_to_string(dir.path().join("bid_curve.csv")).unwrap();
    let prices: Vec<f64> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(!prices.is_empty());
    for w in prices.windows(2) {
        assert!(w[1] >= w[0] - 1e-6);
    }
}

#[test]
fn malformed_config_maps_to_exit_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "[battery]\npower_mw = \"ten\"\n").unwrap();
    let err = commands::load_config(Some(&path)).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("power_mw"), "got: {err}");
}

#[test]
fn missing_corpus_file_maps_to_exit_code_3() {
    let mut cfg = small_config();
    cfg.corpus.kind = "csv".into();
    cfg.corpus.paths = vec!["/nonexistent/regd.csv".into()];
    let dir = tempfile::tempdir().unwrap();
    let err = commands::cmd_backtest(&cfg, "m", dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 3, "got: {err}");
}

#[test]
fn infeasible_bid_maps_to_exit_code_4() {
    let mut cfg = small_config();
    cfg.corpus.periods = 40;
    // A first segment far beyond any feasible capacity cap.
    cfg.experiment.bid_segments_mw = vec![1000.0];
    let dir = tempfile::tempdir().unwrap();
    let err = commands::cmd_bid(&cfg, "m", dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 4, "got: {err}");
}

#[test]
fn seed_changes_output_hash_header_only_via_meta() {
    // Same config, different seed handed to the meta line: outputs differ in
    // their header, and regenerating with the same seed reproduces bytes.
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    commands::cmd_backtest(&cfg, &meta_of(&cfg), &out1).unwrap();
    commands::cmd_backtest(&cfg, &meta_of(&cfg), &out2).unwrap();
    assert_eq!(
        fs::read(out1.join("report.csv")).unwrap(),
        fs::read(out2.join("report.csv")).unwrap()
    );
    assert!(Path::new(&out1).join("summary.json").exists());
}

#[test]
fn error_classes_have_stable_exit_codes() {
    assert_eq!(CliError::Config("x".into()).exit_code(), 2);
    assert_eq!(CliError::Data("x".into()).exit_code(), 3);
    assert_eq!(CliError::Infeasible("x".into()).exit_code(), 4);
    assert_eq!(CliError::Other("x".into()).exit_code(), 1);
}
