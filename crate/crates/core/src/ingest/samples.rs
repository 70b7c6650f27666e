use super::{encode_temporal_pattern, Corpus, CorpusSplit, Segment, TemporalPattern};
use crate::error::{Error, Result};

/// One missing-check-in instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub user: usize,
    /// Ground-truth POI at the target position.
    pub target: usize,
    pub utc_seconds: i64,
    pub pattern: TemporalPattern,
    /// POIs at positions t−1, t−2, …, t−w.
    pub forward: Vec<usize>,
    /// POIs at positions t+1, t+2, …, t+w.
    pub backward: Vec<usize>,
    /// `t_t − t_{t−1}` in hours.
    pub interval_before: f64,
    /// `t_{t+1} − t_t` in hours.
    pub interval_after: f64,
    pub segment: Segment,
}

impl Sample {
    pub fn window(&self) -> usize {
        self.forward.len()
    }
}

/// Every position with at least `w` check-ins on both sides becomes a sample,
/// tagged with the segment of the target position. Context may cross
/// segment boundaries.
pub fn build_samples(corpus: &Corpus, split: &CorpusSplit, w: usize) -> Result<Vec<Sample>> {
    if w == 0 {
        return Err(Error::InvalidInput("window width must be at least 1".into()));
    }
    if split.bounds.len() != corpus.histories.len() {
        return Err(Error::ShapeMismatch(format!(
            "split covers {} users, corpus has {}",
            split.bounds.len(),
            corpus.histories.len()
        )));
    }
    let mut out = Vec::new();
    for (history, bounds) in corpus.histories.iter().zip(&split.bounds) {
        let visits = &history.visits;
        let t = visits.len();
        if t < 2 * w + 1 {
            continue;
        }
        for i in w..t - w {
            let target = visits[i];
            let before = (target.utc_seconds - visits[i - 1].utc_seconds) as f64 / 3600.0;
            let after = (visits[i + 1].utc_seconds - target.utc_seconds) as f64 / 3600.0;
            out.push(Sample {
                user: history.user,
                target: target.poi,
                utc_seconds: target.utc_seconds,
                pattern: encode_temporal_pattern(target.utc_seconds, target.tz_offset_minutes),
                forward: (1..=w).map(|k| visits[i - k].poi).collect(),
                backward: (1..=w).map(|k| visits[i + k].poi).collect(),
                interval_before: before,
                interval_after: after,
                segment: bounds.segment_of(i),
            });
        }
    }
    Ok(out)
}
