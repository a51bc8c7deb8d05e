//! `moldline`: synthesize, extract, select, train, evaluate and report.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use moldline::train::TrainConfig;

fn defaults() -> &'static TrainConfig {
    static D: std::sync::OnceLock<TrainConfig> = std::sync::OnceLock::new();
    D.get_or_init(TrainConfig::default)
}

#[derive(Debug, Parser)]
#[command(name = "moldline", version, about = "Part-width soft sensor for injection molding")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// JSON configuration; flags override its values [default: built-in defaults]
    #[arg(long, global = true, env = "MOLDLINE_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, help = format!("Master seed [default: {}]", defaults().seed))]
    pub seed: Option<u64>,
    #[arg(long, global = true, help = format!("Parallel model runs [default: {}]", defaults().jobs))]
    pub jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with planted ground truth
    Synth(SynthArgs),
    /// Compute the descriptor matrix of a dataset
    Extract(ExtractArgs),
    /// Run recursive feature elimination on the training rows
    Select(SelectArgs),
    /// Train one model kind, or every enabled kind with `--model all`
    Train(TrainArgs),
    /// Score a saved model or a predictions file against dataset labels
    Eval(EvalArgs),
    /// Collect run reports into scores.csv and a ranking table
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, help = format!("Number of cycles [default: {}]", defaults().synth.n_cycles))]
    pub n: Option<usize>,
    #[arg(long, help = format!("Noise multiplier [default: {}]", defaults().synth.noise_level))]
    pub noise: Option<f64>,
    #[arg(long, help = format!("Held-out test cycles [default: {}]", defaults().synth.n_test))]
    pub n_test: Option<usize>,
    /// Output dataset directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Dataset directory
    #[arg(long)]
    pub data: PathBuf,
    /// Output CSV; a `.manifest.json` sidecar is written next to it
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Descriptor CSV written by `extract`
    #[arg(long)]
    pub features: PathBuf,
    /// Dataset directory supplying labels and the train/test split
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long, help = format!("Cross-validation folds [default: {}]", defaults().select.cv_folds))]
    pub cv: Option<usize>,
    /// Descriptor regime: signals, thermo or both
    #[arg(long, default_value = "both")]
    pub regime: String,
    /// Output directory for rfe_curve.csv, selected.txt and correlation.csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Model kind, or `all` for every kind enabled in the config
    #[arg(long)]
    pub model: String,
    /// Dataset directory
    #[arg(long)]
    pub data: PathBuf,
    /// Precomputed descriptor CSV; extracted on the fly when absent
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Descriptor regime: signals, thermo, both, or all configured regimes [default: both; all with --model all]
    #[arg(long)]
    pub regime: Option<String>,
    /// Training iterations for neural kinds [default: per-kind value from the config]
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long, help = format!("Cross-validation folds [default: {}]", defaults().cv_folds))]
    pub cv: Option<usize>,
    /// Skip the hyperparameter grid search [default: search when the config says so (true)]
    #[arg(long)]
    pub no_tune: bool,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Saved model file
    #[arg(long, conflicts_with = "predictions", required_unless_present = "predictions")]
    pub model: Option<PathBuf>,
    /// CSV of `cycle_id,width_mm` predictions
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Dataset directory
    #[arg(long)]
    pub data: PathBuf,
    /// Precomputed descriptor CSV for descriptor models
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Rows to score: test, train or all
    #[arg(long, default_value = "test")]
    pub rows: String,
    /// scores.csv to write [default: none]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory searched recursively for report.json files
    #[arg(long)]
    pub runs: PathBuf,
    /// scores.csv to write [default: <runs>/scores.csv]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let body = serde_json::json!({"error": "Usage", "message": e.render().to_string().trim()});
            eprintln!("{body}");
            return ExitCode::from(2);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut body = serde_json::json!({"error": e.kind(), "message": e.to_string()});
            let code = if let moldline::Error::UnknownModel { valid, .. } = &e {
                body["valid"] = serde_json::json!(valid);
                2
            } else {
                1
            };
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}
