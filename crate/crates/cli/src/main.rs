//! `prosolab` command-line entry point.
//!
//! Exit codes: 0 success, 1 data or validation failure, 2 usage or config
//! failure.

mod annotate;
mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use prosolab::config::RunConfig;
use prosolab::taggers::MajorityMode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] prosolab::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn help_defaults() -> String {
    let mut text = String::from("Configuration keys and defaults (flags override the config file):\n\n");
    for line in RunConfig::default().to_text().lines() {
        text.push_str("  ");
        text.push_str(line);
        text.push('\n');
    }
    text.push_str("\nSet PROSOLAB_LOG (error, warn, info, debug) to control logging.");
    text
}

#[derive(Debug, Parser)]
#[command(name = "prosolab", version, about = "Prosodic prominence annotation and prediction")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for `annotate`.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for subsampling and random baselines.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Classification task: 2 or 3 classes.
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub classes: Option<u8>,
}

impl GlobalOpts {
    /// The config file (or defaults) with command-line overrides applied.
    pub fn run_config(&self) -> CliResult<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    CliError::Usage(format!("cannot read config {}: {e}", path.display()))
                })?;
                RunConfig::parse(&text)
                    .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(c) = self.classes {
            cfg.annotation.n_classes = c;
            if c == 2 {
                cfg.annotation.thresholds.theta2 = None;
            }
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Majority,
    Crf,
    Embed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CalibrateMode {
    /// Fit theta1 against a binary reference.
    Binary,
    /// Split the prominent values at their median (theta2).
    Split,
    /// Both, in that order.
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Annotate aligned recordings with continuous and discrete prominence.
    Annotate(annotate::AnnotateArgs),
    /// Fit discretization thresholds; prints them in config format.
    Calibrate {
        /// Dataset file whose continuous column is calibrated.
        #[arg(long)]
        values: PathBuf,
        /// Dataset file with the reference labels for the same tokens
        /// (label 0 = not prominent, anything else = prominent).
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        mode: CalibrateMode,
        /// Fixed theta1 for `--mode split`; defaults to the configured value.
        #[arg(long)]
        theta1: Option<f64>,
    },
    /// Train a model on a dataset file.
    Train {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Word embedding file (required for `embed`).
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Majority baseline variant: per-word or global.
        #[arg(long, default_value = "per-word")]
        majority_mode: MajorityMode,
    },
    /// Label the tokens of a file with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Token file: first tab-separated column, blank line between sentences.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Score models or stored predictions against a test dataset.
    Evaluate {
        /// Model files; may be repeated.
        #[arg(long)]
        model: Vec<PathBuf>,
        /// Prediction files written by `predict`; may be repeated.
        #[arg(long)]
        predictions: Vec<PathBuf>,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Report TSV (model, task, fraction, accuracy).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Directory for one confusion-matrix TSV per evaluated model.
        #[arg(long)]
        confusion_dir: Option<PathBuf>,
    },
    /// Accuracy as a function of training-set size.
    LearningCurve {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Percentages of the training tokens.
        #[arg(long, default_value = "1,5,10,50,100")]
        fractions: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    match cli.command {
        Command::Annotate(args) => annotate::run(&args, g),
        Command::Calibrate {
            values,
            reference,
            mode,
            theta1,
        } => commands::calibrate(g, &values, reference.as_deref(), mode, theta1),
        Command::Train {
            model,
            train,
            out,
            embeddings,
            majority_mode,
        } => commands::train(g, model, &train, &out, embeddings.as_deref(), majority_mode),
        Command::Predict {
            model,
            input,
            out,
            embeddings,
        } => commands::predict(&model, &input, out.as_deref(), embeddings.as_deref()),
        Command::Evaluate {
            model,
            predictions,
            test,
            embeddings,
            report,
            confusion_dir,
        } => commands::evaluate(
            g,
            &model,
            &predictions,
            &test,
            embeddings.as_deref(),
            report.as_deref(),
            confusion_dir.as_deref(),
        ),
        Command::LearningCurve {
            model,
            train,
            test,
            fractions,
            out,
            embeddings,
        } => commands::learning_curve(
            g,
            model,
            &train,
            &test,
            &fractions,
            out.as_deref(),
            embeddings.as_deref(),
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("PROSOLAB_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let matches = Cli::command().after_help(help_defaults()).get_matches();
    let cli = Cli::from_arg_matches(&matches).unwrap_or_else(|e| e.exit());
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("prosolab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
