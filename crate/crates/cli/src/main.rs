//! `hisa`: batch driver for ingesting market data and tweets, scoring
//! sentiment, training, predicting and running the HiSA vs. DLPM
//! comparison.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hisa_core::features::FeatureMode;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numerical(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<hisa_core::Error> for CliError {
    fn from(e: hisa_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hisa", version, about = "Sentiment-fused LSTM stock price forecasting")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `experiment.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `paths.output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Historical OHLCV CSV.
    #[arg(long, global = true)]
    historical: Option<PathBuf>,
    /// Tweet corpus (JSONL).
    #[arg(long, global = true)]
    tweets: Option<PathBuf>,
    /// Lexicon TSV.
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    /// Daily sentiment CSV produced by `sentiment`.
    #[arg(long, global = true)]
    sentiment: Option<PathBuf>,
    /// Feature set: hisa or dlpm.
    #[arg(long, global = true)]
    mode: Option<FeatureMode>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and normalize the raw bars and tweet corpus.
    Ingest,
    /// Score tweets and write per-trading-day class percentages.
    Sentiment,
    /// Train one model and write its checkpoint.
    Train {
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Predict the test split with a saved checkpoint.
    Predict {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train both feature sets at each epoch size and tabulate accuracy.
    Compare {
        /// Comma-separated epoch sizes, e.g. 5,10,15.
        #[arg(long, value_delimiter = ',')]
        epochs: Option<Vec<usize>>,
    },
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let overrides = [
        (&cli.historical, &mut cfg.paths.historical),
        (&cli.tweets, &mut cfg.paths.tweets),
        (&cli.lexicon, &mut cfg.paths.lexicon),
        (&cli.sentiment, &mut cfg.paths.sentiment),
        (&cli.out, &mut cfg.paths.output_dir),
    ];
    for (flag, slot) in overrides {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
    }
    if cli.mode.is_some() {
        cfg.feature_mode = cli.mode;
    }
    match &cli.command {
        Command::Train { epochs: Some(n) } => cfg.epochs = *n,
        Command::Predict {
            checkpoint: Some(p),
        } => cfg.paths.checkpoint = Some(p.clone()),
        Command::Compare { epochs: Some(list) } => cfg.epoch_sizes = list.clone(),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve(&cli)?;
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Sentiment => commands::sentiment(&cfg),
        Command::Train { .. } => commands::train(&cfg),
        Command::Predict { .. } => commands::predict(&cfg),
        Command::Compare { .. } => commands::compare(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
