//! Subcommand implementations. Each takes the validated run configuration,
//! the output-header string and an output directory, and writes deterministic
//! CSV/JSON artifacts.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use bessreg::bidding::{self, BidConfig};
use bessreg::config::RunConfig;
use bessreg::control::{self, PenaltyModel, PolicyKind};
use bessreg::market::{self, BacktestConfig, BiddingStrategy, MarketPeriod};
use bessreg::signal::{self, RegulationSignal};

use crate::error::CliError;

fn corpus_id(cfg: &RunConfig) -> String {
    if cfg.corpus.kind == "csv" {
        format!("csv:{}", cfg.corpus.paths.join("+"))
    } else {
        format!("{} seed={}", cfg.corpus.kind, cfg.corpus.seed)
    }
}

fn build_corpus(cfg: &RunConfig) -> Result<Vec<RegulationSignal>, CliError> {
    let (signals, clipped) = cfg
        .corpus
        .build(&cfg.market, cfg.battery.efficiency)?;
    if clipped > 0 {
        eprintln!("warning: clipped {clipped} out-of-range samples back into [-1, 1]");
    }
    if signals.is_empty() {
        return Err(CliError::Data("corpus contains no complete periods".into()));
    }
    Ok(signals)
}

fn mu_r_of(cfg: &RunConfig, signals: &[RegulationSignal]) -> f64 {
    if cfg.market.mu_r > 0.0 {
        cfg.market.mu_r
    } else {
        signal::mu_r(signals)
    }
}

fn create(out_dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    fs::create_dir_all(out_dir)?;
    Ok(BufWriter::new(File::create(out_dir.join(name))?))
}

/// Writes the corpus manifest so synthetic runs stay reproducible.
fn write_manifest(cfg: &RunConfig, meta: &str, out_dir: &Path) -> Result<(), CliError> {
    let mut w = create(out_dir, "corpus.toml")?;
    writeln!(w, "# {meta}")?;
    write!(w, "{}", corpus_manifest(cfg))?;
    Ok(())
}

/// The `[corpus]` section of the effective config, which records kind, seed
/// and generator parameters.
fn corpus_manifest(cfg: &RunConfig) -> String {
    let full = cfg.to_toml();
    let mut out = String::new();
    let mut keep = false;
    for line in full.lines() {
        if line.starts_with('[') {
            keep = line == "[corpus]";
        }
        if keep {
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

/// Threshold-depth table: one row per configured (pi, eta) case with the
/// optimal depth and the analytic regret bound.
pub fn cmd_uhat(cfg: &RunConfig, _meta: &str, mut out: impl Write) -> Result<(), CliError> {
    let m = cfg.market.interval_hours();
    writeln!(out, "case  pi_per_mwh  eta     u_hat_pct  epsilon_usd")?;
    for (i, case) in cfg.experiment.uhat_cases.iter().enumerate() {
        let mut battery = cfg.battery.clone();
        battery.efficiency = case.eta;
        let spec = battery.to_spec()?;
        let penalty = PenaltyModel::from_pi(case.pi, m)?;
        let u_hat = control::optimal_cycle_depth(&penalty, &spec)?;
        let eps = control::regret_bound(&penalty, &spec)?;
        writeln!(
            out,
            "{:<5} {:<11} {:<7} {:<10.1} {:.4}",
            i + 1,
            case.pi,
            case.eta,
            u_hat * 100.0,
            eps
        )?;
    }
    Ok(())
}

/// Runs the configured policy over the corpus and writes one trajectory CSV
/// per period, with the SoC carried across periods.
pub fn cmd_simulate(cfg: &RunConfig, meta: &str, out_dir: &Path) -> Result<(), CliError> {
    let spec = cfg.battery.to_spec()?;
    let signals = build_corpus(cfg)?;
    let mu_r = mu_r_of(cfg, &signals);
    let policy = policy_kind(cfg)?;
    let capacity = cfg.experiment.capacity_mw;
    let mut energy = spec.midpoint_mwh();
    for sig in &signals {
        let penalty = PenaltyModel::new(
            cfg.market.delta,
            cfg.market.mu_lambda,
            mu_r,
            sig.interval_hours,
        )?;
        let traj = control::run_policy(sig, capacity, &spec, &penalty, energy, policy)?;
        energy = traj.final_energy_mwh();
        let mut w = create(out_dir, &format!("trajectory_{:05}.csv", sig.period_id))?;
        traj.write_csv(&mut w, &spec, meta)?;
    }
    write_manifest(cfg, meta, out_dir)?;
    Ok(())
}

/// Calibrates the performance-confidence curve and writes it as CSV.
pub fn cmd_calibrate(cfg: &RunConfig, meta: &str, out_dir: &Path) -> Result<(), CliError> {
    let signals = build_corpus(cfg)?;
    let curve = bidding::calibrate_gamma_curve(
        &signals,
        cfg.market.xi,
        cfg.market.delta,
        &cfg.gamma_grid(),
        cfg.battery.efficiency,
        &corpus_id(cfg),
    )?;
    if curve.periods < curve.recommended_min_periods() {
        eprintln!(
            "warning: {} periods calibrate a {} confidence quantile; {} or more recommended",
            curve.periods,
            curve.xi,
            curve.recommended_min_periods()
        );
    }
    let mut w = create(out_dir, "gamma_curve.csv")?;
    curve.write_csv(&mut w, meta)?;
    write_manifest(cfg, meta, out_dir)?;
    Ok(())
}

/// Builds the bid curve from the configured capacity segments and writes it.
pub fn cmd_bid(cfg: &RunConfig, meta: &str, out_dir: &Path) -> Result<(), CliError> {
    let spec = cfg.battery.to_spec()?;
    let signals = build_corpus(cfg)?;
    let curve = bidding::calibrate_gamma_curve(
        &signals,
        cfg.market.xi,
        cfg.market.delta,
        &cfg.gamma_grid(),
        cfg.battery.efficiency,
        &corpus_id(cfg),
    )?;
    let bid_cfg = BidConfig {
        delta: cfg.market.delta,
        mu_r: mu_r_of(cfg, &signals),
        interval_hours: cfg.market.interval_hours(),
        rho_min: cfg.market.rho_min,
    };
    let bid = bidding::build_bid_curve(&cfg.experiment.bid_segments_mw, &spec, &bid_cfg, &curve)?;
    let mut w = create(out_dir, "bid_curve.csv")?;
    bid.write_csv(&mut w, meta)?;
    Ok(())
}

fn policy_kind(cfg: &RunConfig) -> Result<PolicyKind, CliError> {
    match cfg.experiment.policy.as_str() {
        "proposed" => Ok(PolicyKind::Proposed),
        "simple" => Ok(PolicyKind::Simple),
        other => Err(CliError::Config(format!(
            "experiment.policy must be 'proposed' or 'simple', got '{other}'"
        ))),
    }
}

fn market_periods(cfg: &RunConfig, signals: Vec<RegulationSignal>) -> Vec<MarketPeriod> {
    // Synthetic corpora settle at the expected clearing price.
    signals
        .into_iter()
        .map(|signal| MarketPeriod {
            period_id: signal.period_id,
            clearing_price: cfg.market.mu_lambda,
            signal,
            cleared_capacity_mw: 0.0,
        })
        .collect()
}

fn backtest_config(cfg: &RunConfig, mu_r: f64) -> Result<BacktestConfig, CliError> {
    Ok(BacktestConfig {
        policy: policy_kind(cfg)?,
        bidding: BiddingStrategy::FixedCapacity(cfg.experiment.capacity_mw),
        perf: cfg.market.performance()?,
        mu_lambda: cfg.market.mu_lambda_source()?,
        mu_r,
        relax_performance: cfg.market.relax_performance,
        shelf_life_months: cfg.market.shelf_life_months,
        initial_energy_mwh: None,
        settlement_hours: cfg.market.settlement_hours,
    })
}

/// Sequential settlement backtest; writes the per-period report and the
/// summary.
pub fn cmd_backtest(cfg: &RunConfig, meta: &str, out_dir: &Path) -> Result<(), CliError> {
    let spec = cfg.battery.to_spec()?;
    let signals = build_corpus(cfg)?;
    let mu_r = mu_r_of(cfg, &signals);
    let mut run_cfg = backtest_config(cfg, mu_r)?;
    if cfg.experiment.bidding == "curve" {
        let curve = bidding::calibrate_gamma_curve(
            &signals,
            cfg.market.xi,
            cfg.market.delta,
            &cfg.gamma_grid(),
            cfg.battery.efficiency,
            &corpus_id(cfg),
        )?;
        let bid_cfg = BidConfig {
            delta: cfg.market.delta,
            mu_r,
            interval_hours: cfg.market.interval_hours(),
            rho_min: cfg.market.rho_min,
        };
        let bid =
            bidding::build_bid_curve(&cfg.experiment.bid_segments_mw, &spec, &bid_cfg, &curve)?;
        run_cfg.bidding = BiddingStrategy::Curve(bid);
    }
    let periods = market_periods(cfg, signals);
    let report = market::backtest(&periods, &spec, &run_cfg)?;
    let mut w = create(out_dir, "report.csv")?;
    report.write_csv(&mut w, meta)?;
    let mut w = create(out_dir, "summary.json")?;
    report.write_summary_json(&mut w, meta)?;
    Ok(())
}

/// Profit-vs-capacity sweep for both policies, performance constraint
/// relaxed.
pub fn cmd_sweep(cfg: &RunConfig, meta: &str, out_dir: &Path) -> Result<(), CliError> {
    let spec = cfg.battery.to_spec()?;
    let signals = build_corpus(cfg)?;
    let mu_r = mu_r_of(cfg, &signals);
    let run_cfg = backtest_config(cfg, mu_r)?;
    let periods = market_periods(cfg, signals);
    let rows = market::capacity_sweep(
        &periods,
        &cfg.experiment.sweep_capacities_mw,
        &spec,
        &run_cfg,
    )?;
    let mut w = create(out_dir, "sweep.csv")?;
    market::write_sweep_csv(&rows, &mut w, meta)?;
    Ok(())
}

/// Loads the config file, or the built-in defaults when no path is given.
/// Returns the config and its canonical TOML text (the hash input).
pub fn load_config(path: Option<&Path>) -> Result<(RunConfig, String), CliError> {
    let cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    let canonical = cfg.to_toml();
    Ok((cfg, canonical))
}
