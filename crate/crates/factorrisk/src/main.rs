use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};

use factorrisk::{
    cmd_backtest, cmd_bias, cmd_cov, cmd_exposures, cmd_idio, cmd_ingest, cmd_optimize, cmd_plot,
    cmd_regress, cmd_snapshot, cmd_synth, load_config, CliResult,
};

/// Structured multi-factor risk model toolkit.
#[derive(Parser)]
#[command(name = "factorrisk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic market directory with ground truth.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate raw inputs and report the aligned universe.
    Ingest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the exposure-cleaning pipeline and persist processed tensors.
    Exposures {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate daily factor returns and idiosyncratic residuals.
    Regress {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monthly factor covariance at an estimation date.
    Cov {
        #[arg(long)]
        data: PathBuf,
        /// Reuse factor returns from a `regress` output directory.
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        date: Option<NaiveDate>,
    },
    /// Monthly idiosyncratic variances with diagnostics.
    Idio {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        date: Option<NaiveDate>,
    },
    /// Assembled risk model (X, F, Δ) for one date.
    Snapshot {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        date: Option<NaiveDate>,
    },
    /// Rolling decile bias-statistic report.
    Bias {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve one portfolio program and write weights plus diagnostics.
    Optimize {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        date: Option<NaiveDate>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Monthly-rebalance backtest.
    Backtest {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render SVG charts from report directories.
    Plot {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Synth { out, config, seed } => {
            let cfg = load_config(config.as_deref())?;
            cmd_synth(&out, &cfg, seed)
        }
        Command::Ingest { data, out } => cmd_ingest(&data, out.as_deref()),
        Command::Exposures { data, config, out } => {
            let cfg = load_config(config.as_deref())?;
            cmd_exposures(&data, &cfg, &out)
        }
        Command::Regress { data, config, out } => {
            let cfg = load_config(config.as_deref())?;
            cmd_regress(&data, &cfg, &out)
        }
        Command::Cov {
            data,
            from,
            config,
            out,
            date,
        } => {
            let cfg = load_config(config.as_deref())?;
            cmd_cov(&data, from.as_deref(), &cfg, &out, date)
        }
        Command::Idio {
            data,
            config,
            out,
            date,
        } => {
            let cfg = load_config(config.as_deref())?;
            cmd_idio(&data, &cfg, &out, date)
        }
        Command::Snapshot {
            data,
            config,
            out,
            date,
        } => {
            let cfg = load_config(config.as_deref())?;
            cmd_snapshot(&data, &cfg, &out, date)
        }
        Command::Bias { data, config, out } => {
            let cfg = load_config(config.as_deref())?;
            cmd_bias(&data, &cfg, &out)
        }
        Command::Optimize {
            data,
            config,
            out,
            date,
            lambda,
        } => {
            let cfg = load_config(config.as_deref())?;
            cmd_optimize(&data, &cfg, &out, date, lambda)
        }
        Command::Backtest { data, config, out } => {
            let cfg = load_config(config.as_deref())?;
            cmd_backtest(&data, &cfg, &out)
        }
        Command::Plot { data, out } => cmd_plot(&data, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::FAILURE
        }
    }
}
