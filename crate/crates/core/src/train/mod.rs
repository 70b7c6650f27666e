//! Gradients, Adam and the mini-batch training loop.

mod adam;
mod backward;
mod gradcheck;
mod precise;

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;

pub use adam::{adam_step, AdamState};
pub use backward::{backward, backward_into, logit_gradient, Gradients};
pub use gradcheck::{
    compare_gradients, finite_difference_check, relative_error, GradCheckReport, TensorError, DEFAULT_DELTA,
};

use crate::error::{Error, Result};
use crate::eval::{evaluate_parallel, MetricsReport, ModelRanker, DEFAULT_KS};
use crate::ingest::Sample;
use crate::model::{cross_entropy, forward, ModelParams, SpatialContext, VariantConfig};
use crate::numerics::RngState;

/// Validation quantity watched by early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopMetric {
    #[default]
    ValMap,
    ValRecall(usize),
    ValLoss,
}

impl fmt::Display for StopMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopMetric::ValMap => f.write_str("map"),
            StopMetric::ValRecall(k) => write!(f, "recall@{k}"),
            StopMetric::ValLoss => f.write_str("loss"),
        }
    }
}

impl FromStr for StopMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "map" => Ok(StopMetric::ValMap),
            "loss" => Ok(StopMetric::ValLoss),
            _ => lower
                .strip_prefix("recall@")
                .and_then(|k| k.parse().ok())
                .filter(|&k: &usize| k >= 1)
                .map(StopMetric::ValRecall)
                .ok_or_else(|| Error::Config(format!("unknown early-stop metric '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub stop_metric: StopMetric,
    pub learning_rate: f64,
    /// Gradient workers per batch; 1 is the deterministic default.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            max_epochs: 100,
            patience: 5,
            seed: 42,
            stop_metric: StopMetric::ValMap,
            learning_rate: AdamState::DEFAULT_LR,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Best score so far and the parameters that produced it. Scores are
/// oriented so that larger is better.
#[derive(Debug, Clone)]
pub struct EarlyStopState {
    pub patience: usize,
    pub best_score: Option<f64>,
    pub best_epoch: usize,
    pub best_params: Option<ModelParams>,
    pub epochs_since: usize,
}

impl EarlyStopState {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_score: None,
            best_epoch: 0,
            best_params: None,
            epochs_since: 0,
        }
    }

    /// Records one epoch and returns whether training should stop.
    pub fn observe(&mut self, epoch: usize, score: f64, params: &ModelParams) -> bool {
        let improved = match self.best_score {
            None => !score.is_nan(),
            Some(best) => score > best,
        };
        if improved {
            self.best_score = Some(score);
            self.best_epoch = epoch;
            self.best_params = Some(params.clone());
            self.epochs_since = 0;
            return false;
        }
        if self.best_params.is_none() {
            self.best_epoch = epoch;
            self.best_params = Some(params.clone());
        }
        self.epochs_since += 1;
        self.epochs_since >= self.patience
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_recall: [f64; 3],
    pub val_map: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub records: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_recall@1,val_recall@5,val_recall@10,val_map,wall_seconds\n");
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:.3}",
                r.epoch, r.train_loss, r.val_loss, r.val_recall[0], r.val_recall[1], r.val_recall[2], r.val_map, r.wall_seconds
            );
        }
        out
    }

    /// CSV without the wall-clock column, for run-to-run comparison.
    pub fn to_csv_without_time(&self) -> String {
        self.to_csv()
            .lines()
            .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head))
            .fold(String::new(), |mut acc, l| {
                acc.push_str(l);
                acc.push('\n');
                acc
            })
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:>5}  {:>10}  {:>10}  {:>8}  {:>8}  {:>8}  {:>8}  {:>8}\n",
            "epoch", "train_loss", "val_loss", "R@1", "R@5", "R@10", "MAP", "secs"
        );
        for r in &self.records {
            let _ = writeln!(
                out,
                "{:>5}  {:>10.5}  {:>10.5}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.4}  {:>8.2}",
                r.epoch, r.train_loss, r.val_loss, r.val_recall[0], r.val_recall[1], r.val_recall[2], r.val_map, r.wall_seconds
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Parameters from the best validation epoch.
    pub params: ModelParams,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub log: TrainingLog,
}

/// Mean loss and ranking metrics of `params` on `samples`.
pub fn validation_metrics(
    params: &ModelParams,
    samples: &[&Sample],
    spatial: &SpatialContext,
    variant: &VariantConfig,
    ks: &[usize],
    threads: usize,
) -> Result<(f64, MetricsReport)> {
    let ranker = ModelRanker {
        params,
        spatial,
        variant: *variant,
    };
    let report = evaluate_parallel(&ranker, samples, ks, threads)?;
    let loss = mean_loss(params, samples, spatial, variant)?;
    Ok((loss, report))
}

pub fn mean_loss(
    params: &ModelParams,
    samples: &[&Sample],
    spatial: &SpatialContext,
    variant: &VariantConfig,
) -> Result<f64> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let mut sum = 0.0;
    for s in samples {
        sum += cross_entropy(&forward(s, params, spatial, variant)?, s.target);
    }
    Ok(sum / samples.len() as f64)
}

/// Optimizer state plus the buffers reused across batches.
pub struct Trainer<'a> {
    pub params: ModelParams,
    pub adam: AdamState,
    pub config: TrainConfig,
    spatial: &'a SpatialContext,
    variant: VariantConfig,
    rng: RngState,
    grads: Gradients,
    epochs_run: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(
        params: ModelParams,
        spatial: &'a SpatialContext,
        variant: VariantConfig,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        variant.validate()?;
        if spatial.num_pois() != params.num_pois() {
            return Err(Error::ShapeMismatch(format!(
                "model has {} POIs, spatial table has {}",
                params.num_pois(),
                spatial.num_pois()
            )));
        }
        Ok(Self {
            adam: AdamState::new(&params, config.learning_rate),
            grads: Gradients::zeros_like(&params),
            rng: RngState::new(config.seed),
            params,
            config,
            spatial,
            variant,
            epochs_run: 0,
        })
    }

    pub fn epochs_run(&self) -> usize {
        self.epochs_run
    }

    /// Mean-gradient Adam step on one batch; returns the batch's mean loss
    /// before the update.
    pub fn step(&mut self, batch: &[&Sample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyTrainSet);
        }
        let loss_sum = accumulate_batch(
            &mut self.grads,
            batch,
            &self.params,
            self.spatial,
            &self.variant,
            self.config.threads,
        )?;
        self.grads.scale(1.0 / batch.len() as f64);
        adam_step(&mut self.params, &self.grads, &mut self.adam)?;
        Ok(loss_sum / batch.len() as f64)
    }

    /// One pass over `train` in a seeded shuffled order; returns the mean
    /// per-sample loss seen during the pass.
    pub fn run_epoch(&mut self, train: &[&Sample]) -> Result<f64> {
        if train.is_empty() {
            return Err(Error::EmptyTrainSet);
        }
        let mut order: Vec<&Sample> = train.to_vec();
        let mut epoch_rng = self.rng.child(self.epochs_run as u64);
        order.shuffle(epoch_rng.rng());
        let mut total = 0.0;
        for batch in order.chunks(self.config.batch_size) {
            total += self.step(batch)? * batch.len() as f64;
        }
        self.epochs_run += 1;
        Ok(total / train.len() as f64)
    }

    /// Validation loss and metrics at [`DEFAULT_KS`] plus the early-stop
    /// cutoff, if it is not among them.
    pub fn evaluate(&self, samples: &[&Sample]) -> Result<(f64, MetricsReport)> {
        let mut ks = DEFAULT_KS.to_vec();
        if let StopMetric::ValRecall(k) = self.config.stop_metric {
            if !ks.contains(&k) {
                ks.push(k);
            }
        }
        validation_metrics(&self.params, samples, self.spatial, &self.variant, &ks, self.config.threads)
    }

    fn score(&self, loss: f64, report: &MetricsReport) -> f64 {
        match self.config.stop_metric {
            StopMetric::ValMap => report.map,
            StopMetric::ValLoss => -loss,
            StopMetric::ValRecall(k) => report.recall_at(k).unwrap_or(f64::NAN),
        }
    }

    /// Trains until early stopping or the epoch budget. With an empty
    /// validation set every epoch runs and the last parameters are kept.
    pub fn fit(mut self, train: &[&Sample], val: &[&Sample]) -> Result<FitOutcome> {
        if train.is_empty() {
            return Err(Error::EmptyTrainSet);
        }
        let mut stop = EarlyStopState::new(self.config.patience);
        let mut log = TrainingLog::default();
        let mut stopped_early = false;
        let start = Instant::now();
        for epoch in 1..=self.config.max_epochs {
            let train_loss = self.run_epoch(train)?;
            let (val_loss, report) = if val.is_empty() {
                (f64::NAN, MetricsReport::from_ranks(&[], &DEFAULT_KS))
            } else {
                self.evaluate(val)?
            };
            log.records.push(EpochRecord {
                epoch,
                train_loss,
                val_loss,
                val_recall: [report.recall[0], report.recall[1], report.recall[2]],
                val_map: report.map,
                wall_seconds: start.elapsed().as_secs_f64(),
            });
            if val.is_empty() {
                continue;
            }
            let score = self.score(val_loss, &report);
            if stop.observe(epoch, score, &self.params) {
                stopped_early = true;
                break;
            }
        }
        let (params, best_epoch) = match stop.best_params {
            Some(p) => (p, stop.best_epoch),
            None => (self.params, log.records.len()),
        };
        Ok(FitOutcome {
            params,
            best_epoch,
            stopped_early,
            log,
        })
    }
}

/// Mean gradient and mean loss over `batch`; `threads > 1` shards the
/// batch into contiguous parts reduced in order.
pub fn batch_mean_gradient(
    params: &ModelParams,
    batch: &[&Sample],
    spatial: &SpatialContext,
    variant: &VariantConfig,
    threads: usize,
) -> Result<(Gradients, f64)> {
    if batch.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let mut grads = Gradients::zeros_like(params);
    let loss = accumulate_batch(&mut grads, batch, params, spatial, variant, threads)?;
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    Ok((grads, loss / n))
}

/// Overwrites `grads` with the summed batch gradient and returns the summed
/// loss.
fn accumulate_batch(
    grads: &mut Gradients,
    batch: &[&Sample],
    params: &ModelParams,
    spatial: &SpatialContext,
    variant: &VariantConfig,
    threads: usize,
) -> Result<f64> {
    grads.clear();
    let threads = threads.clamp(1, batch.len().max(1));
    if threads == 1 {
        let mut loss = 0.0;
        for s in batch {
            loss += accumulate_one(grads, s, params, spatial, variant)?;
        }
        return Ok(loss);
    }
    let chunk = batch.len().div_ceil(threads);
    let shards: Vec<Result<(Gradients, f64)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = batch
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    let mut g = Gradients::zeros_like(params);
                    let mut loss = 0.0;
                    for s in part {
                        loss += accumulate_one(&mut g, s, params, spatial, variant)?;
                    }
                    Ok((g, loss))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("gradient worker panicked")).collect()
    });
    let mut loss = 0.0;
    for shard in shards {
        let (g, l) = shard?;
        grads.add_assign(&g)?;
        loss += l;
    }
    Ok(loss)
}

fn accumulate_one(
    grads: &mut Gradients,
    sample: &Sample,
    params: &ModelParams,
    spatial: &SpatialContext,
    variant: &VariantConfig,
) -> Result<f64> {
    let trace = forward(sample, params, spatial, variant)?;
    backward_into(grads, &trace, sample, params, variant, 1.0)?;
    Ok(cross_entropy(&trace, sample.target))
}

/// Convenience wrapper around [`Trainer::fit`].
pub fn fit(
    train: &[&Sample],
    val: &[&Sample],
    params: ModelParams,
    spatial: &SpatialContext,
    variant: &VariantConfig,
    config: &TrainConfig,
) -> Result<FitOutcome> {
    Trainer::new(params, spatial, *variant, config.clone())?.fit(train, val)
}
