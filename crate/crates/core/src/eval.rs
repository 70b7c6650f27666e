//! Ranking metrics with a single ground-truth POI per instance.
//!
//! Recall@K is a hit indicator, F1@K reduces to `2·hit/(K+1)` and average
//! precision to `1/rank`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::ingest::Sample;
use crate::model::{forward, predict_topk, truth_rank, ModelParams, SpatialContext, VariantConfig};

pub const DEFAULT_KS: [usize; 3] = [1, 5, 10];

/// Candidate POIs, best first, without duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedList(Vec<usize>);

impl RankedList {
    /// Fails on duplicate entries.
    pub fn new(items: Vec<usize>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(items.len());
        if let Some(dup) = items.iter().find(|&&p| !seen.insert(p)) {
            return Err(Error::InvalidInput(format!("POI {dup} ranked twice")));
        }
        Ok(Self(items))
    }

    pub(crate) fn new_unchecked(items: Vec<usize>) -> Self {
        Self(items)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// 1-based rank of `truth`, if present.
    pub fn rank_of(&self, truth: usize) -> Option<usize> {
        self.0.iter().position(|&p| p == truth).map(|i| i + 1)
    }
}

/// Anything that orders candidate POIs for a sample.
pub trait Ranker {
    fn rank(&self, sample: &Sample) -> Result<RankedList>;

    /// 1-based rank of the sample's ground truth. Override when the rank can
    /// be found without materializing the full list.
    fn truth_rank(&self, sample: &Sample) -> Result<usize> {
        let list = self.rank(sample)?;
        list.rank_of(sample.target).ok_or(Error::TruthMissing {
            truth: sample.target,
            len: list.len(),
        })
    }
}

pub fn recall_at_k(list: &[usize], truth: usize, k: usize) -> f64 {
    if list.iter().take(k).any(|&p| p == truth) {
        1.0
    } else {
        0.0
    }
}

pub fn precision_at_k(list: &[usize], truth: usize, k: usize) -> f64 {
    recall_at_k(list, truth, k) / k as f64
}

/// Harmonic mean of precision@K (`hit/K`) and recall@K (`hit`), which is
/// `2/(K+1)` on a hit and 0 on a miss.
pub fn f1_at_k(list: &[usize], truth: usize, k: usize) -> f64 {
    2.0 * recall_at_k(list, truth, k) / (k as f64 + 1.0)
}

pub fn average_precision(list: &[usize], truth: usize) -> Result<f64> {
    list.iter()
        .position(|&p| p == truth)
        .map(|i| 1.0 / (i + 1) as f64)
        .ok_or(Error::TruthMissing {
            truth,
            len: list.len(),
        })
}

pub fn mean_average_precision(lists: &[RankedList], truths: &[usize]) -> Result<f64> {
    if lists.len() != truths.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} rankings for {} truths",
            lists.len(),
            truths.len()
        )));
    }
    if lists.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (l, &t) in lists.iter().zip(truths) {
        sum += average_precision(l.as_slice(), t)?;
    }
    Ok(sum / lists.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub ks: Vec<usize>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub map: f64,
    pub count: usize,
}

impl MetricsReport {
    /// Aggregates 1-based truth ranks, summing in the given order.
    pub fn from_ranks(ranks: &[usize], ks: &[usize]) -> Self {
        let n = ranks.len();
        let mut hits = vec![0usize; ks.len()];
        let mut ap_sum = 0.0;
        for &r in ranks {
            for (h, &k) in hits.iter_mut().zip(ks) {
                if r <= k {
                    *h += 1;
                }
            }
            ap_sum += 1.0 / r as f64;
        }
        let denom = n.max(1) as f64;
        let recall: Vec<f64> = hits.iter().map(|&h| h as f64 / denom).collect();
        let f1 = recall
            .iter()
            .zip(ks)
            .map(|(&r, &k)| 2.0 * r / (k as f64 + 1.0))
            .collect();
        Self {
            ks: ks.to_vec(),
            recall,
            f1,
            map: ap_sum / denom,
            count: n,
        }
    }

    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.recall[i])
    }

    pub fn f1_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.f1[i])
    }

    /// `(metric, value)` rows in report order.
    pub fn rows(&self) -> Vec<(String, f64)> {
        let mut rows = Vec::new();
        for (k, r) in self.ks.iter().zip(&self.recall) {
            rows.push((format!("recall@{k}"), *r));
        }
        for (k, f) in self.ks.iter().zip(&self.f1) {
            rows.push((format!("f1@{k}"), *f));
        }
        rows.push(("map".into(), self.map));
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (name, v) in self.rows() {
            let _ = writeln!(out, "{name},{v}");
        }
        let _ = writeln!(out, "count,{}", self.count);
        out
    }

    pub fn to_table(&self) -> String {
        let rows = self.rows();
        let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(9);
        let mut out = String::new();
        for (name, v) in rows {
            let _ = writeln!(out, "{name:<width$}  {v:.4}");
        }
        let _ = writeln!(out, "{:<width$}  {}", "instances", self.count);
        out
    }
}

/// Ranks every sample and aggregates all metrics in one pass.
pub fn evaluate<R: Ranker + ?Sized>(ranker: &R, samples: &[&Sample], ks: &[usize]) -> Result<MetricsReport> {
    let ranks = samples
        .iter()
        .map(|s| ranker.truth_rank(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricsReport::from_ranks(&ranks, ks))
}

/// As [`evaluate`], sharding the samples over `threads` workers. The result
/// is identical to the sequential one.
pub fn evaluate_parallel<R: Ranker + Sync + ?Sized>(
    ranker: &R,
    samples: &[&Sample],
    ks: &[usize],
    threads: usize,
) -> Result<MetricsReport> {
    if threads <= 1 || samples.len() < 2 * threads {
        return evaluate(ranker, samples, ks);
    }
    let chunk = samples.len().div_ceil(threads);
    let shards: Vec<Result<Vec<usize>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = samples
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|s| ranker.truth_rank(s)).collect()))
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation worker panicked")).collect()
    });
    let mut ranks = Vec::with_capacity(samples.len());
    for shard in shards {
        ranks.extend(shard?);
    }
    Ok(MetricsReport::from_ranks(&ranks, ks))
}

/// Ranks by the model's output distribution.
pub struct ModelRanker<'a> {
    pub params: &'a ModelParams,
    pub spatial: &'a SpatialContext,
    pub variant: VariantConfig,
}

impl Ranker for ModelRanker<'_> {
    fn rank(&self, sample: &Sample) -> Result<RankedList> {
        let trace = forward(sample, self.params, self.spatial, &self.variant)?;
        Ok(RankedList::new_unchecked(predict_topk(&trace.probs, trace.probs.len())))
    }

    fn truth_rank(&self, sample: &Sample) -> Result<usize> {
        let trace = forward(sample, self.params, self.spatial, &self.variant)?;
        Ok(truth_rank(&trace.probs, sample.target))
    }
}
