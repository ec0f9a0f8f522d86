//! `lenet`: train, evaluate and run the LeNet CT-slice classifier.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or
//! checkpoint error, 3 numeric divergence during training.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lenet_core::data::Split;

pub mod commands;
pub mod config;
pub mod error;

pub use config::{AlphaPreset, AlphaSpec, LossName, Overrides, RunConfig};
pub use error::{CliError, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED, EXIT_OK};

#[derive(Debug, Parser)]
#[command(name = "lenet", version, about = "LeNet-5 CT-slice classifier")]
pub struct Cli {
    /// Worker threads for data loading and evaluation (1 = fully sequential).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write checkpoint, curves and metrics.
    Train(TrainArgs),
    /// Print metrics for a checkpoint on one split.
    Evaluate(EvaluateArgs),
    /// Classify one PGM image.
    Predict(PredictArgs),
    /// Write a synthetic three-class dataset.
    GenSynthetic(GenArgs),
    /// Render a curves CSV as a two-panel SVG.
    ExportCurves(ExportArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset root containing train/ and validation/.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for the run artifacts.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub loss: Option<LossName>,
    /// Focal-loss focusing exponent.
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "validation")]
    pub split: Split,
    /// Run configuration supplying `data`, `metrics_mode` and `positive_classes`.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub curves: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let threads = cli.threads;
    if threads == Some(0) {
        return Err(CliError::config("threads must be at least 1"));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::config(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Train(a) => commands::cmd_train(a, threads),
        Command::Evaluate(a) => commands::cmd_evaluate(a),
        Command::Predict(a) => commands::cmd_predict(a),
        Command::GenSynthetic(a) => commands::cmd_gen_synthetic(a),
        Command::ExportCurves(a) => commands::cmd_export_curves(a),
    })
}
