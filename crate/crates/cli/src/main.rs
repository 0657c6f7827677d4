use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bessreg_cli::commands;
use bessreg_cli::error::CliError;
use bessreg_cli::output_meta;

/// Battery participation in pay-for-performance regulation markets:
/// threshold control, confidence calibration, bidding and settlement
/// backtests.
#[derive(Parser)]
#[command(name = "bessreg", version, about)]
struct Cli {
    /// Path to the TOML run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the corpus seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for generated CSV/JSON files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the optimal-cycle-depth and regret-bound table.
    Uhat,
    /// Run the response policy over the corpus and write trajectory CSVs.
    Simulate,
    /// Calibrate the performance-confidence curve.
    Calibrate,
    /// Build the capacity bid curve.
    Bid,
    /// Run a settlement backtest.
    Backtest,
    /// Sweep profit against regulation capacity for both policies.
    Sweep,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (mut cfg, _) = commands::load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.corpus.seed = seed;
    }
    let canonical = cfg.to_toml();
    let meta = output_meta(&canonical, cfg.corpus.seed);

    match cli.command {
        Command::Uhat => commands::cmd_uhat(&cfg, &meta, std::io::stdout().lock()),
        Command::Simulate => commands::cmd_simulate(&cfg, &meta, &cli.out),
        Command::Calibrate => commands::cmd_calibrate(&cfg, &meta, &cli.out),
        Command::Bid => commands::cmd_bid(&cfg, &meta, &cli.out),
        Command::Backtest => commands::cmd_backtest(&cfg, &meta, &cli.out),
        Command::Sweep => commands::cmd_sweep(&cfg, &meta, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("bessreg: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
