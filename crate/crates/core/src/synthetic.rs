//! Small generated corpora with known structure, for tests, smoke runs and
//! the `selfcheck` command.

use rand::Rng;

use crate::error::Result;
use crate::geodata::{GeoPoint, PoiTable};
use crate::ingest::{encode_temporal_pattern, CheckIn, Sample, Segment};
use crate::model::{HyperParams, ModelParams, SpatialContext};
use crate::numerics::RngState;

/// Monday 2018-01-01 00:00 UTC.
pub const BASE_UTC: i64 = 1_514_764_800;

/// 5 users, 10 POIs, 10 check-ins each. User `u` walks the POI cycle
/// starting at `2u`, three hours per step, so every target is the successor
/// of its predecessor.
pub fn overfit_fixture() -> Result<(PoiTable, Vec<CheckIn>)> {
    let pois = PoiTable::from_entries(
        (0..10)
            .map(|j| {
                let lat = 40.70 + 0.013 * (j % 4) as f64;
                let lon = -74.00 + 0.021 * (j / 4) as f64 + 0.002 * j as f64;
                Ok((format!("p{j}"), GeoPoint::new(lat, lon)?))
            })
            .collect::<Result<Vec<_>>>()?,
    )?;
    let mut checkins = Vec::new();
    for u in 0..5usize {
        for i in 0..10usize {
            let poi = (2 * u + i) % 10;
            let t = BASE_UTC + (u as i64) * 3_600 + (i as i64) * 3 * 3_600;
            checkins.push(CheckIn::new(format!("u{u}"), format!("p{poi}"), t, 0)?);
        }
    }
    Ok((pois, checkins))
}

/// Shape of a planted-structure corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedConfig {
    pub users: usize,
    pub clusters: usize,
    pub pois_per_cluster: usize,
    pub checkins_per_user: usize,
    /// Probability that the gap before a check-in is long, unless the
    /// previous gap already was.
    pub long_gap_prob: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            users: 20,
            clusters: 8,
            pois_per_cluster: 15,
            checkins_per_user: 60,
            long_gap_prob: 0.4,
            seed: 7,
        }
    }
}

/// POIs sit in well separated geographic clusters, and POI `j` of a cluster
/// serves the day session `j mod 5`. After a short gap (10 to 60 minutes) a
/// user stays in the current cluster; after a long gap (3 to 6 hours) the user
/// moves to another cluster. Two long gaps never follow each other, so every
/// check-in shares a cluster with a neighbour. Each check-in picks uniformly
/// among the cluster's POIs serving the session of its timestamp.
pub fn planted_corpus(cfg: &PlantedConfig) -> Result<(PoiTable, Vec<CheckIn>)> {
    let mut rng = RngState::new(cfg.seed);
    let mut entries = Vec::with_capacity(cfg.clusters * cfg.pois_per_cluster);
    for c in 0..cfg.clusters {
        let center_lat = 35.0 + 0.6 * (c % 4) as f64;
        let center_lon = -100.0 + 0.8 * (c / 4) as f64;
        for j in 0..cfg.pois_per_cluster {
            let lat = center_lat + rng.uniform(-0.01, 0.01);
            let lon = center_lon + rng.uniform(-0.01, 0.01);
            entries.push((format!("c{c}p{j}"), GeoPoint::new(lat, lon)?));
        }
    }
    let pois = PoiTable::from_entries(entries)?;

    let mut checkins = Vec::with_capacity(cfg.users * cfg.checkins_per_user);
    for u in 0..cfg.users {
        let mut urng = rng.child(u as u64);
        let r = urng.rng();
        let mut cluster = r.gen_range(0..cfg.clusters);
        let mut t = BASE_UTC + r.gen_range(0..7 * 86_400);
        let mut last_long = true;
        for _ in 0..cfg.checkins_per_user {
            let long = !last_long && r.gen_bool(cfg.long_gap_prob);
            last_long = long;
            if long {
                t += r.gen_range(3 * 3_600..6 * 3_600);
                if cfg.clusters > 1 {
                    cluster = (cluster + r.gen_range(1..cfg.clusters)) % cfg.clusters;
                }
            } else {
                t += r.gen_range(600..3_600);
            }
            let session = encode_temporal_pattern(t, 0).session();
            let slots: Vec<usize> = (0..cfg.pois_per_cluster).filter(|j| j % 5 == session).collect();
            let j = if slots.is_empty() {
                session % cfg.pois_per_cluster
            } else {
                slots[r.gen_range(0..slots.len())]
            };
            checkins.push(CheckIn::new(format!("u{u}"), format!("c{cluster}p{j}"), t, 0)?);
        }
    }
    Ok((pois, checkins))
}

/// POIs scattered over a 30 km square, a Glorot-initialized model and one
/// random sample, as used by the gradient self-check.
pub fn random_instance(
    seed: u64,
    num_users: usize,
    num_pois: usize,
    hp: HyperParams,
) -> Result<(SpatialContext, ModelParams, Sample)> {
    let mut rng = RngState::new(seed);
    let entries = (0..num_pois)
        .map(|j| {
            let p = GeoPoint::new(40.6 + rng.uniform(0.0, 0.3), -74.1 + rng.uniform(0.0, 0.3))?;
            Ok((format!("p{j}"), p))
        })
        .collect::<Result<Vec<_>>>()?;
    let params = ModelParams::glorot(num_users, num_pois, hp, &mut rng.child(1));
    let r = rng.rng();
    let utc = BASE_UTC + r.gen_range(0..30 * 86_400);
    let sample = Sample {
        user: r.gen_range(0..num_users),
        target: r.gen_range(0..num_pois),
        utc_seconds: utc,
        pattern: encode_temporal_pattern(utc, r.gen_range(-300..=300)),
        forward: (0..hp.w).map(|_| r.gen_range(0..num_pois)).collect(),
        backward: (0..hp.w).map(|_| r.gen_range(0..num_pois)).collect(),
        interval_before: r.gen_range(0.05..30.0),
        interval_after: r.gen_range(0.05..30.0),
        segment: Segment::Train,
    };
    Ok((SpatialContext::new(PoiTable::from_entries(entries)?), params, sample))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::build_corpus;

    #[test]
    fn overfit_fixture_shape() {
        let (pois, cs) = overfit_fixture().unwrap();
        let corpus = build_corpus(&pois, &cs).unwrap();
        assert_eq!((corpus.num_users(), corpus.num_pois(), corpus.num_checkins()), (5, 10, 50));
        for h in &corpus.histories {
            for pair in h.visits.windows(2) {
                assert_eq!(pair[1].poi, (pair[0].poi + 1) % 10);
            }
        }
    }

    #[test]
    fn planted_is_reproducible_and_sessioned() {
        let cfg = PlantedConfig::default();
        let (p1, c1) = planted_corpus(&cfg).unwrap();
        let (_, c2) = planted_corpus(&cfg).unwrap();
        assert_eq!(c1, c2);
        for c in &c1 {
            let j: usize = c.poi_id.split('p').nth(1).unwrap().parse().unwrap();
            assert_eq!(j % 5, encode_temporal_pattern(c.utc_seconds, 0).session());
        }
        assert_eq!(p1.len(), cfg.clusters * cfg.pois_per_cluster);
    }
}
