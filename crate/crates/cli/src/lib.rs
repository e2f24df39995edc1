//! Command-line entry point: `synth`, `label`, `graph`, `train`, `eval`,
//! `report` and `ablate`.
//!
//! Exit codes: 0 success, 1 validation error, 2 runtime error, 3 failed
//! `eval --assert`.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "physreg", version, about = "Physics-regularized contrastive embeddings for fall-motion windows")]
pub struct Cli {
    /// Experiment config (TOML). Missing sections take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config value, e.g. `--set train.epochs=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with planted labels.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Assign a physics label to every window.
    Label {
        #[arg(long)]
        manifest: PathBuf,
        /// Output directory (defaults to the dataset directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the relation sets of one batch as JSON lines.
    Graph(GraphArgs),
    /// Train the encoder.
    Train {
        /// Manifest of a labeled dataset.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Exit 3 unless metrics are in range and Head > Trunk > Supported
        /// along the severity axis.
        #[arg(long = "assert")]
        assert_ok: bool,
    },
    /// Render `metrics.json` or `ablation.json` as a text table.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the ablation grid and the vanilla control.
    Ablate {
        /// Dataset to use; synthesized from the config when absent.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Training seeds, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Manifest of a labeled dataset.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Explicit batch as comma separated window ids.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["epoch", "batch"])]
    pub windows: Vec<String>,
    /// Training epoch whose sampled batch to dump (with `--batch`).
    #[arg(long, requires = "batch")]
    pub epoch: Option<usize>,
    /// Batch index within the epoch.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Errors are printed to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
