use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use stddp::ingest::{FilterConfig, FilterMode};
use stddp::model::{HyperParams, Variant};
use stddp::train::TrainConfig;
use stddp::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DataFormat {
    Foursquare,
    Gowalla,
    /// Output of `stddp prepare`.
    Prepared,
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DataFormat::Foursquare => "foursquare",
            DataFormat::Gowalla => "gowalla",
            DataFormat::Prepared => "prepared",
        })
    }
}

impl FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "foursquare" => Ok(DataFormat::Foursquare),
            "gowalla" => Ok(DataFormat::Gowalla),
            "prepared" => Ok(DataFormat::Prepared),
            _ => Err(Error::Config(format!("unknown format {s:?}"))),
        }
    }
}

/// Everything a command needs, resolved from defaults, the config file and
/// command-line overrides in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: Option<PathBuf>,
    pub format: DataFormat,
    pub out: PathBuf,
    pub seed: u64,
    pub hyper: HyperParams,
    pub train: TrainConfig,
    pub variant: Variant,
    pub ks: Vec<usize>,
    pub filter: FilterConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let train = TrainConfig::default();
        Self {
            data: None,
            format: DataFormat::Foursquare,
            out: PathBuf::from("out"),
            seed: train.seed,
            hyper: HyperParams::default(),
            train,
            variant: Variant::Full,
            ks: vec![1, 5, 10],
            filter: FilterConfig::default(),
        }
    }
}

pub const KEYS: [&str; 18] = [
    "data",
    "format",
    "out",
    "seed",
    "d",
    "h",
    "w",
    "batch",
    "lr",
    "epochs",
    "patience",
    "k",
    "variant",
    "stop_metric",
    "threads",
    "min_user_checkins",
    "min_poi_users",
    "filter_mode",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

pub fn parse_ks(value: &str) -> Result<Vec<usize>> {
    let ks: Vec<usize> = value
        .split(',')
        .map(|k| parse::<usize>("k", k.trim()))
        .collect::<Result<_>>()?;
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Config(format!("k must be a list of positive integers, got {value:?}")));
    }
    Ok(ks)
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "data" => self.data = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "out" => self.out = PathBuf::from(value),
            "seed" => {
                self.seed = parse(key, value)?;
                self.train.seed = self.seed;
            }
            "d" => self.hyper.d = parse(key, value)?,
            "h" => self.hyper.h = parse(key, value)?,
            "w" => self.hyper.w = parse(key, value)?,
            "batch" => self.train.batch_size = parse(key, value)?,
            "lr" => self.train.learning_rate = parse(key, value)?,
            "epochs" => self.train.max_epochs = parse(key, value)?,
            "patience" => self.train.patience = parse(key, value)?,
            "k" => self.ks = parse_ks(value)?,
            "variant" => self.variant = value.parse()?,
            "stop_metric" => self.train.stop_metric = value.parse()?,
            "threads" => self.train.threads = parse(key, value)?,
            "min_user_checkins" => self.filter.min_user_checkins = parse(key, value)?,
            "min_poi_users" => self.filter.min_poi_users = parse(key, value)?,
            "filter_mode" => {
                self.filter.mode = match value {
                    "single" => FilterMode::SinglePass,
                    "fixpoint" => FilterMode::Fixpoint,
                    _ => return Err(Error::Config(format!("bad value {value:?} for filter_mode"))),
                }
            }
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and lines starting with `#`
    /// are skipped; unknown and repeated keys are errors.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(Error::Config(format!("line {}: {key} given twice", i + 1)));
            }
            seen.push(key);
            self.set(key, value)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip(e))))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.train.validate()?;
        if self.train.seed != self.seed {
            return Err(Error::Config("training seed differs from experiment seed".into()));
        }
        Ok(())
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| Error::Config("no input given (use --data or data = ... in the config)".into()))
    }

    /// Canonical `key = value` rendering; parsing it back yields `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let ks: Vec<String> = self.ks.iter().map(ToString::to_string).collect();
        let mode = match self.filter.mode {
            FilterMode::SinglePass => "single",
            FilterMode::Fixpoint => "fixpoint",
        };
        let values: [String; 18] = [
            self.data.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            self.format.to_string(),
            self.out.display().to_string(),
            self.seed.to_string(),
            self.hyper.d.to_string(),
            self.hyper.h.to_string(),
            self.hyper.w.to_string(),
            self.train.batch_size.to_string(),
            self.train.learning_rate.to_string(),
            self.train.max_epochs.to_string(),
            self.train.patience.to_string(),
            ks.join(","),
            self.variant.to_string(),
            self.train.stop_metric.to_string(),
            self.train.threads.to_string(),
            self.filter.min_user_checkins.to_string(),
            self.filter.min_poi_users.to_string(),
            mode.to_string(),
        ];
        for (key, value) in KEYS.iter().zip(values) {
            if key == &"data" && value.is_empty() {
                continue;
            }
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(msg) => msg,
        other => other.to_string(),
    }
}
