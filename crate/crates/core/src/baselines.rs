//! Counting baselines: forward/backward transitions and global/personal
//! popularity, all fitted on training positions only.
//!
//! Every ranking is a full permutation of the POIs. Ties fall back to
//! global popularity and then to ascending index, except inside TOP2 where
//! the user's own counts tie by index.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::{RankedList, Ranker};
use crate::ingest::{Corpus, CorpusSplit, Sample};

/// Consecutive training pairs `(prev, next)` per user.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransitionTable {
    counts: HashMap<(usize, usize), u32>,
    by_prev: Vec<HashMap<usize, u32>>,
    by_next: Vec<HashMap<usize, u32>>,
}

impl TransitionTable {
    fn new(num_pois: usize) -> Self {
        Self {
            counts: HashMap::new(),
            by_prev: vec![HashMap::new(); num_pois],
            by_next: vec![HashMap::new(); num_pois],
        }
    }

    fn add(&mut self, prev: usize, next: usize) {
        *self.counts.entry((prev, next)).or_default() += 1;
        *self.by_prev[prev].entry(next).or_default() += 1;
        *self.by_next[next].entry(prev).or_default() += 1;
    }

    pub fn count(&self, prev: usize, next: usize) -> u32 {
        self.counts.get(&(prev, next)).copied().unwrap_or(0)
    }

    /// Stored pairs and their counts, in no particular order.
    pub fn pairs(&self) -> impl Iterator<Item = ((usize, usize), u32)> + '_ {
        self.counts.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PopularityTable {
    global: Vec<u32>,
    per_user: Vec<HashMap<usize, u32>>,
}

impl PopularityTable {
    pub fn global(&self, poi: usize) -> u32 {
        self.global.get(poi).copied().unwrap_or(0)
    }

    pub fn user(&self, user: usize, poi: usize) -> u32 {
        self.per_user
            .get(user)
            .and_then(|m| m.get(&poi))
            .copied()
            .unwrap_or(0)
    }

    pub fn num_users(&self) -> usize {
        self.per_user.len()
    }

    pub fn num_pois(&self) -> usize {
        self.global.len()
    }
}

/// Fitted tables plus the precomputed TOP1 order.
#[derive(Debug, Clone)]
pub struct BaselineCounts {
    pub transitions: TransitionTable,
    pub popularity: PopularityTable,
    top1: Vec<usize>,
    /// Position of each POI in `top1`.
    top1_pos: Vec<usize>,
}

/// Counts transitions and visits over every user's training prefix. A
/// pair is counted only when both check-ins lie in the training segment.
pub fn fit_counts(corpus: &Corpus, split: &CorpusSplit) -> BaselineCounts {
    let m = corpus.num_pois();
    let mut transitions = TransitionTable::new(m);
    let mut global = vec![0u32; m];
    let mut per_user = vec![HashMap::new(); corpus.num_users()];
    for (h, b) in corpus.histories.iter().zip(&split.bounds) {
        let train = &h.visits[..b.train_end.min(h.visits.len())];
        for v in train {
            global[v.poi] += 1;
            *per_user[h.user].entry(v.poi).or_default() += 1;
        }
        for pair in train.windows(2) {
            transitions.add(pair[0].poi, pair[1].poi);
        }
    }
    let mut top1: Vec<usize> = (0..m).collect();
    top1.sort_by(|&a, &b| global[b].cmp(&global[a]).then(a.cmp(&b)));
    let mut top1_pos = vec![0; m];
    for (i, &p) in top1.iter().enumerate() {
        top1_pos[p] = i;
    }
    BaselineCounts {
        transitions,
        popularity: PopularityTable { global, per_user },
        top1,
        top1_pos,
    }
}

impl BaselineCounts {
    pub fn num_pois(&self) -> usize {
        self.top1.len()
    }

    pub fn knows_user(&self, user: usize) -> bool {
        user < self.popularity.num_users()
    }

    pub fn rank_top1(&self) -> RankedList {
        RankedList::new_unchecked(self.top1.clone())
    }

    /// Primary counts first, the remaining POIs in TOP1 order.
    fn rank_by(&self, primary: &HashMap<usize, u32>, break_by_popularity: bool) -> RankedList {
        let mut head: Vec<(usize, u32)> = primary.iter().map(|(&p, &c)| (p, c)).collect();
        head.sort_by(|a, b| {
            b.1.cmp(&a.1).then_with(|| {
                if break_by_popularity {
                    self.top1_pos[a.0].cmp(&self.top1_pos[b.0])
                } else {
                    a.0.cmp(&b.0)
                }
            })
        });
        let mut out: Vec<usize> = head.iter().map(|&(p, _)| p).collect();
        out.extend(self.top1.iter().copied().filter(|p| !primary.contains_key(p)));
        RankedList::new_unchecked(out)
    }

    fn rank_of_by(&self, primary: &HashMap<usize, u32>, truth: usize, break_by_popularity: bool) -> usize {
        let key = |p: usize| {
            let c = primary.get(&p).copied().unwrap_or(0);
            let tie = if c > 0 && !break_by_popularity { p } else { self.top1_pos[p] };
            (c, tie)
        };
        let (tc, tt) = key(truth);
        1 + (0..self.num_pois())
            .filter(|&p| {
                let (c, t) = key(p);
                match c.cmp(&tc) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => t < tt,
                }
            })
            .count()
    }

    fn empty_row() -> &'static HashMap<usize, u32> {
        static EMPTY: std::sync::OnceLock<HashMap<usize, u32>> = std::sync::OnceLock::new();
        EMPTY.get_or_init(HashMap::new)
    }

    fn prev_row(&self, prev: usize) -> &HashMap<usize, u32> {
        self.transitions.by_prev.get(prev).unwrap_or(Self::empty_row())
    }

    fn next_row(&self, next: usize) -> &HashMap<usize, u32> {
        self.transitions.by_next.get(next).unwrap_or(Self::empty_row())
    }

    fn user_row(&self, user: usize) -> &HashMap<usize, u32> {
        self.popularity.per_user.get(user).unwrap_or(Self::empty_row())
    }

    /// Candidates `q` by `count(prev, q)`.
    pub fn rank_forward(&self, prev: usize) -> RankedList {
        self.rank_by(self.prev_row(prev), true)
    }

    /// Candidates `q` by `count(q, next)`.
    pub fn rank_backward(&self, next: usize) -> RankedList {
        self.rank_by(self.next_row(next), true)
    }

    /// The user's own visit counts, padded by TOP1. Unknown users get TOP1.
    pub fn rank_top2(&self, user: usize) -> RankedList {
        self.rank_by(self.user_row(user), false)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    Forward,
    Backward,
    Top1,
    Top2,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [Baseline::Forward, Baseline::Backward, Baseline::Top1, Baseline::Top2];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Forward => "Forward",
            Baseline::Backward => "Backward",
            Baseline::Top1 => "TOP1",
            Baseline::Top2 => "TOP2",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "forward" => Ok(Baseline::Forward),
            "backward" => Ok(Baseline::Backward),
            "top1" => Ok(Baseline::Top1),
            "top2" => Ok(Baseline::Top2),
            _ => Err(Error::Config(format!("unknown baseline '{s}'"))),
        }
    }
}

pub struct BaselineRanker<'a> {
    pub counts: &'a BaselineCounts,
    pub kind: Baseline,
}

impl BaselineRanker<'_> {
    fn row(&self, sample: &Sample) -> Option<(&HashMap<usize, u32>, bool)> {
        let c = self.counts;
        match self.kind {
            Baseline::Forward => Some((c.prev_row(sample.forward[0]), true)),
            Baseline::Backward => Some((c.next_row(sample.backward[0]), true)),
            Baseline::Top1 => None,
            Baseline::Top2 => Some((c.user_row(sample.user), false)),
        }
    }
}

impl Ranker for BaselineRanker<'_> {
    fn rank(&self, sample: &Sample) -> Result<RankedList> {
        Ok(match self.row(sample) {
            Some((row, pop)) => self.counts.rank_by(row, pop),
            None => self.counts.rank_top1(),
        })
    }

    fn truth_rank(&self, sample: &Sample) -> Result<usize> {
        if sample.target >= self.counts.num_pois() {
            return Err(Error::TruthMissing {
                truth: sample.target,
                len: self.counts.num_pois(),
            });
        }
        Ok(match self.row(sample) {
            Some((row, pop)) => self.counts.rank_of_by(row, sample.target, pop),
            None => self.counts.top1_pos[sample.target] + 1,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodata::{GeoPoint, PoiTable};
    use crate::ingest::{build_corpus, split_corpus, CheckIn};

    fn corpus(users: &[(&str, &[&str])]) -> (Corpus, CorpusSplit) {
        let pois = PoiTable::from_entries(
            ["A", "B", "C", "D", "E"]
                .iter()
                .enumerate()
                .map(|(i, id)| (id.to_string(), GeoPoint::new(10.0 + i as f64 * 0.01, 10.0).unwrap()))
                .collect(),
        )
        .unwrap();
        let mut cs = Vec::new();
        for (u, seq) in users {
            for (i, p) in seq.iter().enumerate() {
                cs.push(CheckIn::new(*u, *p, 1_000_000 + 3600 * i as i64, 0).unwrap());
            }
        }
        let c = build_corpus(&pois, &cs).unwrap();
        let s = split_corpus(&c);
        (c, s)
    }

    #[test]
    fn hand_counted_transitions() {
        // 5 check-ins: the first 4 are training (floor(0.8·5) = 4)
        let (c, s) = corpus(&[("u", &["A", "B", "A", "C", "E"])]);
        let fit = fit_counts(&c, &s);
        let idx = |id: &str| c.pois.index_of(id).unwrap();
        let mut pairs: Vec<_> = fit.transitions.pairs().collect();
        pairs.sort();
        assert_eq!(pairs, vec![((idx("A"), idx("B")), 1), ((idx("A"), idx("C")), 1), ((idx("B"), idx("A")), 1)]);
        // (A,B) and (A,C) tie, and B, C are equally popular, so index decides
        let fwd = fit.rank_forward(idx("A"));
        assert_eq!(&fwd.as_slice()[..2], &[idx("B"), idx("C")]);
        assert_eq!(fit.popularity.global(idx("E")), 0);
    }

    #[test]
    fn single_training_checkin_gives_no_transitions() {
        let (c, s) = corpus(&[("u", &["A", "B"])]);
        let fit = fit_counts(&c, &s);
        assert!(fit.transitions.is_empty());
        assert_eq!(fit.popularity.global(c.pois.index_of("A").unwrap()), 1);
    }

    #[test]
    fn global_is_sum_of_users() {
        let (c, s) = corpus(&[("u", &["A", "B", "A", "C", "E"]), ("v", &["C", "C", "D", "A", "B"])]);
        let fit = fit_counts(&c, &s);
        for p in 0..c.num_pois() {
            let sum: u32 = (0..c.num_users()).map(|u| fit.popularity.user(u, p)).sum();
            assert_eq!(sum, fit.popularity.global(p));
        }
    }

    #[test]
    fn unseen_prev_falls_back_to_top1() {
        let (c, s) = corpus(&[("u", &["A", "B", "A", "C", "E"])]);
        let fit = fit_counts(&c, &s);
        let e = c.pois.index_of("E").unwrap();
        assert_eq!(fit.rank_forward(e), fit.rank_top1());
        assert_eq!(fit.rank_top2(99), fit.rank_top1());
        assert!(!fit.knows_user(99));
    }

    #[test]
    fn top2_padding() {
        let (c, s) = corpus(&[("u", &["A", "A", "A", "C", "E"]), ("v", &["B", "B", "B", "B", "D"])]);
        let fit = fit_counts(&c, &s);
        let v = c.user_ids.iter().position(|x| x == "v").unwrap();
        let idx = |id: &str| c.pois.index_of(id).unwrap();
        let top1 = fit.rank_top1();
        assert_eq!(top1.as_slice()[..3], [idx("B"), idx("A"), idx("C")]);
        let t2 = fit.rank_top2(v);
        let mut want = vec![idx("B")];
        want.extend(top1.as_slice().iter().copied().filter(|&p| p != idx("B")));
        assert_eq!(t2.as_slice(), &want[..]);
    }
}
