//! `dspp`: simulate on-off Cox processes, evaluate their transforms, and
//! check the renewal representation numerically.
//!
//! Data goes to the file named by `--out`; standard output carries one
//! summary line per command.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{parse_list, List};

#[derive(Debug, Parser)]
#[command(name = "dspp", version, about = "On-off Cox processes and their renewal representation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Model config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated theta values; overrides the config grid.
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    grid: Option<List>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SimMode {
    /// Event epochs of the stationary process on [0, horizon).
    Events,
    /// The intensity path on [0, horizon) as level,duration rows.
    Path,
    /// Independent inter-arrival times from the renewal construction.
    Interarrivals,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Which {
    #[value(name = "phiF")]
    PhiF,
    #[value(name = "phiG")]
    PhiG,
    Residual,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample events, intensity paths or inter-arrival times.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: SimMode,
        /// Time horizon (events, path).
        #[arg(long)]
        horizon: Option<f64>,
        /// Number of draws (interarrivals).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Tabulate a transform on the theta grid.
    Transform {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        which: Which,
    },
    /// Recover the off-time transform from a tabulated inter-arrival transform.
    Decompose {
        /// theta,value CSV of the inter-arrival transform.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        out: PathBuf,
        /// Diagnostics JSON; defaults to the output path with `.diagnostics.json` appended.
        #[arg(long)]
        diagnostics: Option<PathBuf>,
    },
    /// Run the equivalence report and write it as JSON.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_lst: Option<usize>,
        #[arg(long)]
        n_ks: Option<usize>,
        #[arg(long)]
        n_residual: Option<usize>,
        /// Moment-check horizon in units of the mean inter-arrival time.
        #[arg(long)]
        moment_horizon: Option<f64>,
        #[arg(long, hide = true)]
        perturb_k: Option<f64>,
    },
    /// Numerically invert the inter-arrival transform to F(t).
    Invert {
        #[command(flatten)]
        common: Common,
        /// Comma-separated times t > 0.
        #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
        times: List,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            common,
            mode,
            horizon,
            count,
        } => commands::simulate(&common, mode, horizon, count),
        Command::Transform { common, which } => commands::transform(&common, which),
        Command::Decompose {
            input,
            lambda,
            k,
            out,
            diagnostics,
        } => commands::decompose(&input, lambda, k, &out, diagnostics),
        Command::Verify {
            common,
            n_lst,
            n_ks,
            n_residual,
            moment_horizon,
            perturb_k,
        } => commands::verify(
            &common,
            commands::VerifySizes {
                n_lst,
                n_ks,
                n_residual,
                moment_horizon,
                perturb_k,
            },
        ),
        Command::Invert { common, times } => commands::invert(&common, &times.0),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("dspp: {e}");
            e.exit_code()
        }
    }
}
