//! The `prs` command line, exposed as a library so it can be driven in-process.

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use prs_core::pmatch::Target;
use prs_core::PrsError;

use config::{Config, Overrides, CONFIG_ENV};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_TRAINING: u8 = 4;
const EXIT_RESOURCE: u8 = 5;

/// Permutation-wise re-ranking: data generation, training, re-ranking and evaluation.
#[derive(Parser)]
#[command(name = "prs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config file; defaults to $PRS_CONFIG, then built-in defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Length of the re-ranked list (rerank.n).
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Beam width (rerank.beam_k).
    #[arg(long, global = true)]
    beam_k: Option<usize>,
    /// Weight of the page-view reward (rerank.alpha).
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Weight of the click reward (rerank.beta).
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Global seed (seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Simulate training logs and held-out requests.
    GenData,
    /// Train the point-wise click model.
    TrainCtr,
    /// Train the point-wise continue-browsing model.
    TrainNext,
    /// Train the list-wise model.
    TrainDpwn,
    /// Select the final list for every held-out request.
    Rerank,
    /// Write validation metrics and the end-to-end uplift report.
    Evaluate,
    /// Mean LR of the top beam list across an alpha grid.
    SweepAlpha,
    /// Time beam search and list scoring; writes nothing.
    Bench,
    /// Compare full-width beam search with exhaustive enumeration.
    OracleCheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::TrainCtr => "train-ctr",
            Command::TrainNext => "train-next",
            Command::TrainDpwn => "train-dpwn",
            Command::Rerank => "rerank",
            Command::Evaluate => "evaluate",
            Command::SweepAlpha => "sweep-alpha",
            Command::Bench => "bench",
            Command::OracleCheck => "oracle-check",
        }
    }
}

fn exit_code(e: &PrsError) -> u8 {
    match e {
        PrsError::Config(_)
        | PrsError::Parse { .. }
        | PrsError::Format(_)
        | PrsError::Lookup(_)
        | PrsError::Io(_) => EXIT_CONFIG,
        PrsError::Training(_) => EXIT_TRAINING,
        PrsError::Resource(_) => EXIT_RESOURCE,
        PrsError::Domain(_) | PrsError::Shape(_) | PrsError::Metric(_) => EXIT_FAILURE,
    }
}

fn run(command: Command, cfg: &Config) -> prs_core::Result<(bool, String)> {
    let ok = |s| Ok((true, s));
    match command {
        Command::GenData => ok(commands::gen_data(cfg)?),
        Command::TrainCtr => ok(commands::train_point(cfg, Target::Ctr)?),
        Command::TrainNext => ok(commands::train_point(cfg, Target::Next)?),
        Command::TrainDpwn => ok(commands::train_list(cfg)?),
        Command::Rerank => ok(commands::rerank(cfg)?),
        Command::Evaluate => ok(commands::evaluate(cfg)?),
        Command::SweepAlpha => ok(commands::sweep_alpha(cfg)?),
        Command::Bench => ok(commands::bench(cfg)?),
        Command::OracleCheck => commands::oracle_check(cfg),
    }
}

/// Runs one command line (program name first) and returns the process exit
/// code. Summaries go to `out`, diagnostics to `err`.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
                return EXIT_USAGE;
            }
            let _ = write!(out, "{text}");
            return 0;
        }
    };
    let stage = cli.command.name();
    let mut cfg = match Config::load(cli.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = writeln!(err, "prs {stage}: {e}");
            return EXIT_CONFIG;
        }
    };
    cfg.apply(&Overrides {
        n: cli.n,
        beam_k: cli.beam_k,
        alpha: cli.alpha,
        beta: cli.beta,
        seed: cli.seed,
    });
    match run(cli.command, &cfg) {
        Ok((pass, summary)) => {
            let _ = writeln!(out, "{summary}");
            if pass {
                0
            } else {
                EXIT_FAILURE
            }
        }
        Err(e) => {
            let _ = writeln!(err, "prs {stage}: {e}");
            exit_code(&e)
        }
    }
}
