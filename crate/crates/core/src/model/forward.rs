use std::cmp::Ordering;
use std::sync::Arc;

use super::{ModelParams, VariantConfig};
use crate::error::{Error, Result};
use crate::geodata::{PoiTable, SpatialRowCache};
use crate::ingest::Sample;
use crate::numerics::{axpy, log_sum_exp, matvec_acc, matvec_into, stable_softmax, tanh, tanh_in_place};

/// POI table plus a cache of its normalized distance rows.
#[derive(Debug)]
pub struct SpatialContext {
    pub table: PoiTable,
    cache: SpatialRowCache,
}

impl SpatialContext {
    pub fn new(table: PoiTable) -> Self {
        Self::with_capacity(table, SpatialRowCache::DEFAULT_CAPACITY)
    }

    pub fn with_capacity(table: PoiTable, capacity: usize) -> Self {
        Self {
            table,
            cache: SpatialRowCache::new(capacity),
        }
    }

    pub fn num_pois(&self) -> usize {
        self.table.len()
    }

    pub fn row(&self, poi: usize) -> Result<Arc<Vec<f64>>> {
        self.cache.get(poi, &self.table)
    }
}

/// Dependence term for one side: `d = s ⊙ tanh(w · interval)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceTrace {
    pub spatial: Arc<Vec<f64>>,
    pub interval: f64,
    /// `tanh(w · interval)`.
    pub iota: Vec<f64>,
    pub dependence: Vec<f64>,
}

/// Every activation of one forward pass, kept for backprop.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub user: usize,
    pub forward_ctx: Vec<usize>,
    pub backward_ctx: Vec<usize>,
    pub variant: VariantConfig,
    pub pattern: [f64; 7],
    pub dep_before: Option<DependenceTrace>,
    pub dep_after: Option<DependenceTrace>,
    /// `e(p_{t−k})`, k = 1..w; empty when the forward branch is off.
    pub emb_before: Vec<Vec<f64>>,
    pub emb_after: Vec<Vec<f64>>,
    pub emb_user: Vec<f64>,
    pub hidden_before: Option<Vec<f64>>,
    pub hidden_after: Option<Vec<f64>>,
    pub hidden_user: Vec<f64>,
    pub hidden_time: Option<Vec<f64>>,
    /// Dynamic preference `c`.
    pub preference: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

fn check_sample(sample: &Sample, params: &ModelParams, m: usize) -> Result<()> {
    let w = params.w_minus.len();
    if params.num_pois() != m {
        return Err(Error::ShapeMismatch(format!(
            "parameters cover {} POIs, table has {m}",
            params.num_pois()
        )));
    }
    if sample.forward.len() != w || sample.backward.len() != w {
        return Err(Error::ShapeMismatch(format!(
            "sample window {}/{} does not match model window {w}",
            sample.forward.len(),
            sample.backward.len()
        )));
    }
    if sample.user >= params.num_users() {
        return Err(Error::ShapeMismatch(format!(
            "user {} outside {} users",
            sample.user,
            params.num_users()
        )));
    }
    if let Some(p) = sample
        .forward
        .iter()
        .chain(&sample.backward)
        .chain(std::iter::once(&sample.target))
        .find(|&&p| p >= m)
    {
        return Err(Error::ShapeMismatch(format!("POI {p} outside {m} POIs")));
    }
    Ok(())
}

fn dependence(spatial: Arc<Vec<f64>>, weights: &[f64], interval: f64) -> DependenceTrace {
    let iota: Vec<f64> = weights.iter().map(|w| tanh(w * interval)).collect();
    let dependence = spatial.iter().zip(&iota).map(|(s, i)| s * i).collect();
    DependenceTrace {
        spatial,
        interval,
        iota,
        dependence,
    }
}

/// `tanh(Σₖ Wₖ e(pₖ))`, returning the embeddings read and the activation.
fn context_hidden(
    weights: &[crate::numerics::DenseMatrix],
    poi_emb: &crate::numerics::DenseMatrix,
    ctx: &[usize],
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let h = weights[0].rows();
    let mut acc = vec![0.0; h];
    let mut embs = Vec::with_capacity(ctx.len());
    for (wk, &p) in weights.iter().zip(ctx) {
        let e = poi_emb.row(p).to_vec();
        matvec_acc(wk, &e, &mut acc)?;
        embs.push(e);
    }
    tanh_in_place(&mut acc);
    Ok((embs, acc))
}

/// Scores every candidate POI for `sample`.
pub fn forward(
    sample: &Sample,
    params: &ModelParams,
    spatial: &SpatialContext,
    variant: &VariantConfig,
) -> Result<ForwardTrace> {
    variant.validate()?;
    let m = spatial.num_pois();
    check_sample(sample, params, m)?;
    let h = params.w_user.rows();

    let dep_before = if variant.use_dependence && variant.use_forward_branch {
        let s = spatial.row(sample.forward[0])?;
        Some(dependence(s, &params.w_before, sample.interval_before))
    } else {
        None
    };
    let dep_after = if variant.use_dependence && variant.use_backward_branch {
        let s = spatial.row(sample.backward[0])?;
        Some(dependence(s, &params.w_after, sample.interval_after))
    } else {
        None
    };

    let mut preference = vec![0.0; h];

    let (emb_before, hidden_before) = if variant.use_forward_branch {
        let (e, hid) = context_hidden(&params.w_minus, &params.poi_emb, &sample.forward)?;
        (e, Some(hid))
    } else {
        (Vec::new(), None)
    };
    let (emb_after, hidden_after) = if variant.use_backward_branch {
        let (e, hid) = context_hidden(&params.w_plus, &params.poi_emb, &sample.backward)?;
        (e, Some(hid))
    } else {
        (Vec::new(), None)
    };

    let emb_user = params.user_emb.row(sample.user).to_vec();
    let mut hidden_user = vec![0.0; h];
    matvec_into(&params.w_user, &emb_user, &mut hidden_user)?;
    tanh_in_place(&mut hidden_user);

    let pattern = sample.pattern.as_f64();
    let hidden_time = if variant.use_time_pattern {
        let mut ht = vec![0.0; h];
        matvec_into(&params.w_time, &pattern, &mut ht)?;
        tanh_in_place(&mut ht);
        Some(ht)
    } else {
        None
    };

    let parts = [
        hidden_before.as_deref(),
        hidden_after.as_deref(),
        Some(hidden_user.as_slice()),
        hidden_time.as_deref(),
    ];
    for part in parts.into_iter().flatten() {
        axpy(1.0, part, &mut preference);
    }

    let mut logits = vec![0.0; m];
    matvec_into(&params.w_out, &preference, &mut logits)?;
    // d₋ + d₊ + W_c c, summed in that order
    if let Some(dep) = &dep_before {
        for (l, d) in logits.iter_mut().zip(&dep.dependence) {
            *l += d;
        }
    }
    if let Some(dep) = &dep_after {
        for (l, d) in logits.iter_mut().zip(&dep.dependence) {
            *l += d;
        }
    }
    let probs = stable_softmax(&logits);

    Ok(ForwardTrace {
        user: sample.user,
        forward_ctx: sample.forward.clone(),
        backward_ctx: sample.backward.clone(),
        variant: *variant,
        pattern,
        dep_before,
        dep_after,
        emb_before,
        emb_after,
        emb_user,
        hidden_before,
        hidden_after,
        hidden_user,
        hidden_time,
        preference,
        logits,
        probs,
    })
}

/// `−log o[target]`, computed as `logsumexp(logits) − logits[target]`.
pub fn cross_entropy(trace: &ForwardTrace, target: usize) -> f64 {
    log_sum_exp(&trace.logits) - trace.logits[target]
}

fn by_probability(probs: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| {
        probs[b]
            .partial_cmp(&probs[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }
}

/// The `k` most probable POIs, ties broken by ascending index.
pub fn predict_topk(probs: &[f64], k: usize) -> Vec<usize> {
    let k = k.min(probs.len());
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    let cmp = by_probability(probs);
    if k == 0 {
        return Vec::new();
    }
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, &cmp);
        idx.truncate(k);
    }
    idx.sort_unstable_by(&cmp);
    idx
}

/// 1-based position `truth` would take in the full ranking of `probs`.
pub fn truth_rank(probs: &[f64], truth: usize) -> usize {
    let pt = probs[truth];
    1 + probs
        .iter()
        .enumerate()
        .filter(|&(j, &p)| p > pt || (p == pt && j < truth))
        .count()
}
