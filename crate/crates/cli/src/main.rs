//! `mixwass` command-line driver.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "mixwass", version, about = "Embed finite metric spaces into Gaussian mixtures under MW2")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Snowflake exponent in (0, 1].
    #[arg(long, global = true, default_value_t = 1.0)]
    pub alpha: f64,
    /// Mixture components of the transformer.
    #[arg(long, global = true, default_value_t = 5)]
    pub k: usize,
    /// Dimension parameter: sphere dimension N for `gen sphere` and
    /// `train sphere`, output dimension for `train custom`.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Landmark count (overrides the experiment default).
    #[arg(long, global = true)]
    pub landmarks: Option<usize>,
    /// Training iterations (overrides the experiment default).
    #[arg(long, global = true)]
    pub iters: Option<usize>,
    /// Initial learning rate; the final rate keeps the experiment's ratio.
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = ScaleArg::Desk)]
    pub scale: ScaleArg,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Format of reports and tables.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleArg {
    Paper,
    Desk,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset: distance matrix plus graph or points.
    Gen {
        #[command(subcommand)]
        dataset: commands::Dataset,
    },
    /// Constructive embedding of a metric space into empirical mixtures.
    Embed {
        /// Distance matrix (.csv) or space (.json).
        #[arg(long)]
        input: PathBuf,
    },
    /// Train transformers and baselines.
    Train {
        #[command(subcommand)]
        experiment: commands::Experiment,
    },
    /// Distortion report and PAC curve of a trained model or embedding.
    Report {
        /// Distance matrix (.csv) or space (.json).
        #[arg(long)]
        input: PathBuf,
        /// Model file written by `train`.
        #[arg(long, conflicts_with = "embedding", required_unless_present = "embedding")]
        model: Option<PathBuf>,
        /// Mixture file written by `embed`.
        #[arg(long)]
        embedding: Option<PathBuf>,
    },
    /// Evaluate the PAC distortion and probability formulas.
    Pac {
        /// Number of points.
        #[arg(long)]
        n: usize,
        /// Target probability; omitted means a grid.
        #[arg(long, conflicts_with = "distortion")]
        delta: Option<f64>,
        /// Distortion D > 2 to invert.
        #[arg(long)]
        distortion: Option<f64>,
    },
    /// Sample mixture densities on a grid.
    Density {
        /// Mixture file written by `embed` or `train`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 512)]
        points: usize,
        /// Replace each std σ by log10(σ + 2.1) first.
        #[arg(long)]
        sigma_transform: bool,
    },
    /// Compare analytic gradients with central differences.
    Gradcheck {
        /// Number of random model configurations.
        #[arg(long, default_value_t = 50)]
        configs: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let c = &cli.common;
    let result = match cli.command {
        Command::Gen { dataset } => commands::gen(c, dataset),
        Command::Embed { input } => commands::embed(c, &input),
        Command::Train { experiment } => commands::train(c, experiment),
        Command::Report { input, model, embedding } => commands::report(c, &input, model.as_deref(), embedding.as_deref()),
        Command::Pac { n, delta, distortion } => commands::pac(c, n, delta, distortion),
        Command::Density { input, points, sigma_transform } => commands::density(c, &input, points, sigma_transform),
        Command::Gradcheck { configs } => commands::gradcheck(c, configs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
