//! From raw check-in files to identification samples.
//!
//! The pipeline is `parse_* → filter_min_activity → split_corpus →
//! build_samples`; [`prepared`] persists the result.

mod filter;
mod parse;
mod pattern;
pub mod prepared;
mod samples;
mod split;

pub use filter::{build_corpus, filter_min_activity, FilterConfig, FilterMode};
pub use parse::{parse_foursquare, parse_gowalla, ParseOutcome};
pub use pattern::{encode_temporal_pattern, TemporalPattern};
pub use samples::{build_samples, Sample};
pub use split::{chronological_split, split_corpus, CorpusSplit, Segment, SplitBounds};

use crate::error::{Error, Result};
use crate::geodata::PoiTable;

/// Latest accepted timestamp, 2100-01-01T00:00:00Z.
pub const MAX_UTC_SECONDS: i64 = 4_102_444_800;

/// One raw check-in, still keyed by external ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckIn {
    pub user_id: String,
    pub poi_id: String,
    pub utc_seconds: i64,
    pub tz_offset_minutes: i32,
}

impl CheckIn {
    pub fn new(
        user_id: impl Into<String>,
        poi_id: impl Into<String>,
        utc_seconds: i64,
        tz_offset_minutes: i32,
    ) -> Result<Self> {
        if !(0..MAX_UTC_SECONDS).contains(&utc_seconds) {
            return Err(Error::InvalidInput(format!(
                "timestamp {utc_seconds} outside [1970, 2100)"
            )));
        }
        if !(-720..=840).contains(&tz_offset_minutes) {
            return Err(Error::InvalidInput(format!(
                "timezone offset {tz_offset_minutes} outside [-720, 840]"
            )));
        }
        Ok(Self {
            user_id: user_id.into(),
            poi_id: poi_id.into(),
            utc_seconds,
            tz_offset_minutes,
        })
    }
}

/// A check-in after dense reindexing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Visit {
    pub poi: usize,
    pub utc_seconds: i64,
    pub tz_offset_minutes: i32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserHistory {
    pub user: usize,
    /// Sorted ascending by time; ties keep file order.
    pub visits: Vec<Visit>,
}

impl UserHistory {
    pub fn len(&self) -> usize {
        self.visits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visits.is_empty()
    }
}

/// Densely indexed users, POIs and their time-ordered histories.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub pois: PoiTable,
    pub user_ids: Vec<String>,
    pub histories: Vec<UserHistory>,
}

impl Corpus {
    pub fn num_users(&self) -> usize {
        self.user_ids.len()
    }

    pub fn num_pois(&self) -> usize {
        self.pois.len()
    }

    pub fn num_checkins(&self) -> usize {
        self.histories.iter().map(UserHistory::len).sum()
    }

    /// `1 − check_ins / (N·M)`.
    pub fn sparsity(&self) -> f64 {
        let cells = self.num_users() as f64 * self.num_pois() as f64;
        if cells == 0.0 {
            return 1.0;
        }
        1.0 - self.num_checkins() as f64 / cells
    }
}
