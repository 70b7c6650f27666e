mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{DataFormat, ExperimentConfig};
use stddp::{Error, Result};

#[derive(Parser)]
#[command(name = "stddp", version, about = "Missing check-in identification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

/// Command-line values override the config file.
#[derive(Args, Default)]
struct Overrides {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Input file: raw dump or prepared corpus.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<DataFormat>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Embedding dimension.
    #[arg(long, global = true)]
    d: Option<usize>,
    /// Hidden units.
    #[arg(long, global = true)]
    h: Option<usize>,
    /// Window width.
    #[arg(long, global = true)]
    w: Option<usize>,
    #[arg(long, global = true)]
    batch: Option<usize>,
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Maximum number of epochs.
    #[arg(long, global = true)]
    epochs: Option<usize>,
    #[arg(long, global = true)]
    patience: Option<usize>,
    /// Cutoffs, e.g. `1,5,10`.
    #[arg(long, global = true)]
    k: Option<String>,
    /// Bi-STDDP, F-STDDP, B-STDDP, Bi-A or Bi-B.
    #[arg(long, global = true)]
    variant: Option<String>,
    /// `map`, `loss` or `recall@K`.
    #[arg(long, global = true)]
    stop_metric: Option<String>,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, filter and split a raw dump; write the prepared corpus and stats.
    Prepare,
    /// Train one model with early stopping; write checkpoint and log.
    Train {
        /// Start from this checkpoint instead of a fresh initialization.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score a checkpoint on one split.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Score the counting baselines.
    Baselines {
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Train and score every model variant with the same seed and data.
    Ablate {
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
    },
    /// Train and score once per value of one hyperparameter.
    Sweep {
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<usize>,
    },
    /// Gradient check and metric identities on generated data.
    Selfcheck {
        /// Random instances per window width.
        #[arg(long, default_value_t = 10)]
        instances: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SweepParam {
    D,
    H,
    W,
}

impl Overrides {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let pairs: [(&str, Option<String>); 15] = [
            ("data", self.data.as_ref().map(|p| p.display().to_string())),
            ("format", self.format.map(|f| f.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("d", self.d.map(|v| v.to_string())),
            ("h", self.h.map(|v| v.to_string())),
            ("w", self.w.map(|v| v.to_string())),
            ("batch", self.batch.map(|v| v.to_string())),
            ("lr", self.lr.map(|v| v.to_string())),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("patience", self.patience.map(|v| v.to_string())),
            ("k", self.k.clone()),
            ("variant", self.variant.clone()),
            ("stop_metric", self.stop_metric.clone()),
            ("threads", self.threads.map(|v| v.to_string())),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = cli.overrides.resolve()?;
    match cli.command {
        Command::Prepare => commands::prepare(&cfg),
        Command::Train { resume } => commands::train(&cfg, resume.as_deref()),
        Command::Evaluate { checkpoint, split } => commands::evaluate(&cfg, &checkpoint, split.into()),
        Command::Baselines { split } => commands::baselines(&cfg, split.into()),
        Command::Ablate { split } => commands::ablate(&cfg, split.into()),
        Command::Sweep { param, values } => commands::sweep(&cfg, param, &values),
        Command::Selfcheck { instances } => commands::selfcheck(&cfg, instances),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let missing = matches!(&e, Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound);
            ExitCode::from(if e.is_bad_input() || missing { 2 } else { 1 })
        }
    }
}
