//! The `nbr` command line: corpus preparation, tuning, runs, evaluation,
//! sweeps, ablations and significance tests.

pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use nbr_core::trex::PolicyKind;

use commands::{EvalArgs, FoldChoice};
use config::load_config;

/// Marks errors caused by the invocation rather than the data.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "nbr", version, about = "Next-basket recommendation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Fairness,
    Diversity,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FoldArg {
    Validation,
    Test,
    All,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest, filter and split a corpus
    Prepare {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print statistics of a prepared corpus
    Stats {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Grid-search hyperparameters on validation users
    Tune {
        #[arg(long)]
        config: PathBuf,
    },
    /// Recommend for test users with the configured method and score them
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Repetition threshold for TREx
        #[arg(long, allow_negative_numbers = true)]
        v: Option<f64>,
    },
    /// Score a predictions file against a prepared corpus
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Output directory (default: `eval` next to the predictions)
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        fold: FoldArg,
        #[arg(long, default_value_t = 0.2)]
        popular_share: f64,
    },
    /// Sweep the repetition threshold of a TREx variant
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        policy: PolicyArg,
    },
    /// Repetition-module ablation
    Ablate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Paired t-tests between two per-user metric files
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Directory for significance.csv
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus in canonical format
    Synth {
        #[arg(long)]
        users: usize,
        #[arg(long)]
        items: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "synth")]
        out: PathBuf,
    },
}

fn config_arg(path: &std::path::Path) -> anyhow::Result<config::RunConfig> {
    load_config(path).map_err(|e| anyhow::anyhow!(UsageError(format!("{e:#}"))))
}

fn execute(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Prepare { config } => commands::prepare(&config_arg(&config)?).map(drop),
        Command::Stats { corpus } => commands::stats(&corpus),
        Command::Tune { config } => commands::tune(&config_arg(&config)?).map(drop),
        Command::Run { config, v } => commands::run(&config_arg(&config)?, v).map(drop),
        Command::Eval {
            predictions,
            corpus,
            k,
            out,
            fold,
            popular_share,
        } => commands::eval(EvalArgs {
            predictions: &predictions,
            corpus: &corpus,
            k,
            out,
            fold: match fold {
                FoldArg::Validation => FoldChoice::Validation,
                FoldArg::Test => FoldChoice::Test,
                FoldArg::All => FoldChoice::All,
            },
            popular_share,
        })
        .map(drop),
        Command::Sweep { config, policy } => {
            let kind = match policy {
                PolicyArg::Fairness => PolicyKind::Fairness,
                PolicyArg::Diversity => PolicyKind::Diversity,
            };
            commands::sweep(&config_arg(&config)?, kind).map(drop)
        }
        Command::Ablate { config } => commands::ablate(&config_arg(&config)?).map(drop),
        Command::Compare { a, b, out } => commands::compare(&a, &b, out.as_deref()),
        Command::Synth { users, items, seed, out } => commands::synth(users, items, seed, &out).map(drop),
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code: 0 on success, 1 on usage errors, 2 on
/// data errors.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_DATA
            }
        }
    }
}
