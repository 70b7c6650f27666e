#![allow(dead_code)]

use rand::Rng;
use stddp::geodata::{GeoPoint, PoiTable};
use stddp::ingest::{encode_temporal_pattern, Sample, Segment};
use stddp::model::{HyperParams, ModelParams, SpatialContext};
use stddp::numerics::RngState;

/// Random POIs around a city, a Glorot model and one random sample.
pub struct Instance {
    pub spatial: SpatialContext,
    pub params: ModelParams,
    pub sample: Sample,
}

pub fn random_instance(seed: u64, n: usize, m: usize, hp: HyperParams) -> Instance {
    let mut rng = RngState::new(seed);
    let table = PoiTable::from_entries(
        (0..m)
            .map(|i| {
                let p = GeoPoint::new(40.6 + rng.uniform(0.0, 0.3), -74.1 + rng.uniform(0.0, 0.3)).unwrap();
                (format!("p{i}"), p)
            })
            .collect(),
    )
    .unwrap();
    let params = ModelParams::glorot(n, m, hp, &mut rng.child(1));
    let r = rng.rng();
    let utc = 1_500_000_000 + r.gen_range(0..10_000_000);
    let sample = Sample {
        user: r.gen_range(0..n),
        target: r.gen_range(0..m),
        utc_seconds: utc,
        pattern: encode_temporal_pattern(utc, r.gen_range(-300..=300)),
        forward: (0..hp.w).map(|_| r.gen_range(0..m)).collect(),
        backward: (0..hp.w).map(|_| r.gen_range(0..m)).collect(),
        interval_before: r.gen_range(0.05..30.0),
        interval_after: r.gen_range(0.05..30.0),
        segment: Segment::Train,
    };
    Instance {
        spatial: SpatialContext::new(table),
        params,
        sample,
    }
}

pub mod baseline_oracle {
    use rand::Rng;
    use stddp::geodata::{GeoPoint, PoiTable};
    use stddp::ingest::{build_corpus, CheckIn, Corpus, CorpusSplit};
    use stddp::numerics::RngState;

    /// Up to 20 users and 15 POIs with random short histories.
    pub fn random_corpus(seed: u64) -> Corpus {
        let mut rng = RngState::new(seed);
        let r = rng.rng();
        let m = r.gen_range(2..=15);
        let n = r.gen_range(1..=20);
        let table = PoiTable::from_entries(
            (0..m)
                .map(|i| (format!("p{i}"), GeoPoint::new(i as f64 * 0.01, 0.0).unwrap()))
                .collect(),
        )
        .unwrap();
        let mut cs = Vec::new();
        for u in 0..n {
            let len = r.gen_range(1..=14);
            for i in 0..len {
                let p = r.gen_range(0..m);
                cs.push(CheckIn::new(format!("u{u}"), format!("p{p}"), 1_000_000 + 600 * i as i64, 0).unwrap());
            }
        }
        build_corpus(&table, &cs).unwrap()
    }

    fn train_prefixes(c: &Corpus, s: &CorpusSplit) -> Vec<(usize, Vec<usize>)> {
        c.histories
            .iter()
            .zip(&s.bounds)
            .map(|(h, b)| (h.user, h.visits[..b.train_end].iter().map(|v| v.poi).collect()))
            .collect()
    }

    fn popularity(c: &Corpus, s: &CorpusSplit, q: usize) -> usize {
        train_prefixes(c, s).iter().map(|(_, seq)| seq.iter().filter(|&&p| p == q).count()).sum()
    }

    fn pair_count(c: &Corpus, s: &CorpusSplit, a: usize, b: usize) -> usize {
        train_prefixes(c, s)
            .iter()
            .map(|(_, seq)| seq.windows(2).filter(|w| w[0] == a && w[1] == b).count())
            .sum()
    }

    fn sort_desc(mut items: Vec<(usize, usize, usize)>) -> Vec<usize> {
        // (candidate, primary, secondary): primary desc, secondary desc, index asc
        items.sort_by(|x, y| y.1.cmp(&x.1).then(y.2.cmp(&x.2)).then(x.0.cmp(&y.0)));
        items.into_iter().map(|x| x.0).collect()
    }

    pub fn top1(c: &Corpus, s: &CorpusSplit) -> Vec<usize> {
        sort_desc((0..c.num_pois()).map(|q| (q, popularity(c, s, q), 0)).collect())
    }

    pub fn forward(c: &Corpus, s: &CorpusSplit, prev: usize) -> Vec<usize> {
        sort_desc((0..c.num_pois()).map(|q| (q, pair_count(c, s, prev, q), popularity(c, s, q))).collect())
    }

    pub fn backward(c: &Corpus, s: &CorpusSplit, next: usize) -> Vec<usize> {
        sort_desc((0..c.num_pois()).map(|q| (q, pair_count(c, s, q, next), popularity(c, s, q))).collect())
    }

    pub fn top2(c: &Corpus, s: &CorpusSplit, user: usize) -> Vec<usize> {
        let prefixes = train_prefixes(c, s);
        let own: Vec<usize> = prefixes
            .iter()
            .filter(|(u, _)| *u == user)
            .flat_map(|(_, seq)| seq.clone())
            .collect();
        let count = |q: usize| own.iter().filter(|&&p| p == q).count();
        let visited: Vec<(usize, usize, usize)> =
            (0..c.num_pois()).filter(|&q| count(q) > 0).map(|q| (q, count(q), 0)).collect();
        let mut out = sort_desc(visited);
        out.extend(top1(c, s).into_iter().filter(|&q| count(q) == 0));
        out
    }
}
