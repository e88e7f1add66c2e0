mod alloc;
mod artifacts;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use funssn::Error;

use commands::Globals;
use config::RunConfig;

#[global_allocator]
static ALLOCATOR: alloc::TrackingAllocator = alloc::TrackingAllocator;

/// Semi-structured function-on-function regression engine.
#[derive(Parser)]
#[command(name = "funssn", version, disable_help_subcommand = true)]
struct Cli {
    /// Run configuration document (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (all numeric kernels are single-threaded; recorded
    /// for provenance).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Heap budget in bytes for large intermediate matrices.
    #[arg(long, global = true)]
    memory_budget: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with its ground truth bundle.
    Simulate,
    /// Train a model and write a checkpoint, training log, and metrics.
    Fit,
    /// Predict with a checkpoint; writes predictions and both parts.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Score predictions (or a checkpoint) against a dataset.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Post-hoc orthogonalization: reattribute deep predictions to the
    /// structured part and write corrected surfaces.
    Pho {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Export estimated weight surfaces from a checkpoint.
    Surfaces {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Memory/time scaling comparison of the array path vs a naive
    /// long-format design matrix.
    Bench,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_)
        | Error::Format { .. }
        | Error::Parse { .. }
        | Error::Checkpoint(_) => 1,
        Error::DegenerateData(_)
        | Error::DegenerateCurve { .. }
        | Error::TrainingFailure { .. }
        | Error::CapacityExceeded(_)
        | Error::ContractViolation(_) => 2,
        Error::Io(_) => 3,
    }
}

fn run(cli: Cli) -> funssn::Result<()> {
    if cli.threads == 0 {
        return Err(Error::invalid("--threads must be at least 1"));
    }
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.threads > 1 {
        eprintln!("note: numeric kernels are single-threaded; --threads recorded only");
    }
    let globals = Globals {
        out_dir: cli.out_dir,
        seed: cli.seed,
        memory_budget: cli.memory_budget,
    };
    match &cli.command {
        Command::Simulate => commands::cmd_simulate(&cfg, &globals),
        Command::Fit => commands::cmd_fit(&cfg, &globals),
        Command::Predict { checkpoint } => commands::cmd_predict(&cfg, &globals, checkpoint),
        Command::Evaluate {
            checkpoint,
            predictions,
        } => commands::cmd_evaluate(&cfg, &globals, checkpoint.as_deref(), predictions.as_deref()),
        Command::Pho { checkpoint } => commands::cmd_pho(&cfg, &globals, checkpoint),
        Command::Surfaces { checkpoint } => commands::cmd_surfaces(&cfg, &globals, checkpoint),
        Command::Bench => commands::cmd_bench(&cfg, &globals),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successes; anything else is a
            // usage error (exit code 1)
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
