use std::collections::{HashMap, HashSet};

use super::{CheckIn, Corpus, UserHistory, Visit};
use crate::error::{Error, Result};
use crate::geodata::PoiTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterMode {
    /// Drop sparse users, then unpopular POIs, once.
    #[default]
    SinglePass,
    /// Repeat the single pass until nothing changes.
    Fixpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterConfig {
    pub min_user_checkins: usize,
    pub min_poi_users: usize,
    pub mode: FilterMode,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_user_checkins: 10,
            min_poi_users: 10,
            mode: FilterMode::SinglePass,
        }
    }
}

/// Removes users with fewer than `min_user_checkins` check-ins, then POIs
/// visited by fewer than `min_poi_users` distinct remaining users, and
/// reindexes what is left.
pub fn filter_min_activity(
    pois: &PoiTable,
    checkins: &[CheckIn],
    config: &FilterConfig,
) -> Result<Corpus> {
    if checkins.is_empty() {
        return Err(Error::EmptyCorpus(None));
    }
    let mut kept: Vec<&CheckIn> = checkins.iter().collect();
    loop {
        let before = kept.len();
        kept = single_pass(&kept, config);
        if config.mode == FilterMode::SinglePass || kept.len() == before {
            break;
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyCorpus(Some("nothing survives activity filtering".into())));
    }
    reindex(pois, kept)
}

/// Reindexes a corpus without filtering anything out.
pub fn build_corpus(pois: &PoiTable, checkins: &[CheckIn]) -> Result<Corpus> {
    if checkins.is_empty() {
        return Err(Error::EmptyCorpus(None));
    }
    reindex(pois, checkins.iter().collect())
}

fn single_pass<'a>(checkins: &[&'a CheckIn], config: &FilterConfig) -> Vec<&'a CheckIn> {
    let mut per_user: HashMap<&str, usize> = HashMap::new();
    for c in checkins {
        *per_user.entry(&c.user_id).or_default() += 1;
    }
    let active: Vec<&CheckIn> = checkins
        .iter()
        .copied()
        .filter(|c| per_user[c.user_id.as_str()] >= config.min_user_checkins)
        .collect();

    let mut visitors: HashMap<&str, HashSet<&str>> = HashMap::new();
    for c in &active {
        visitors.entry(&c.poi_id).or_default().insert(&c.user_id);
    }
    active
        .into_iter()
        .filter(|c| visitors[c.poi_id.as_str()].len() >= config.min_poi_users)
        .collect()
}

fn reindex(pois: &PoiTable, kept: Vec<&CheckIn>) -> Result<Corpus> {
    let surviving: HashSet<&str> = kept.iter().map(|c| c.poi_id.as_str()).collect();
    let mut table = PoiTable::new();
    for (id, point) in pois.iter() {
        if surviving.contains(id) {
            table.insert_or_get(id, point);
        }
    }

    let mut user_index: HashMap<&str, usize> = HashMap::new();
    let mut user_ids = Vec::new();
    let mut histories: Vec<UserHistory> = Vec::new();
    for c in kept {
        let poi = table.index_of(&c.poi_id).ok_or_else(|| {
            Error::InvalidInput(format!("check-in references unknown POI {}", c.poi_id))
        })?;
        let u = *user_index.entry(&c.user_id).or_insert_with(|| {
            user_ids.push(c.user_id.clone());
            histories.push(UserHistory {
                user: histories.len(),
                visits: Vec::new(),
            });
            histories.len() - 1
        });
        histories[u].visits.push(Visit {
            poi,
            utc_seconds: c.utc_seconds,
            tz_offset_minutes: c.tz_offset_minutes,
        });
    }
    for h in &mut histories {
        // stable: equal timestamps keep file order
        h.visits.sort_by_key(|v| v.utc_seconds);
    }
    Ok(Corpus {
        pois: table,
        user_ids,
        histories,
    })
}
