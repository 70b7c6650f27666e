//! The `STDDP1` prepared-corpus file.
//!
//! A UTF-8, tab-separated text file. The first line is the header
//! `STDDP1 <N> <M> <w>`; every following line is a record tagged by its
//! first field:
//!
//! ```text
//! U  <user index>  <external user id>
//! P  <poi index>   <external poi id>  <lat>  <lon>
//! C  <user index>  <poi index>  <utc seconds>  <tz offset minutes>
//! S  <segment>  <user>  <target poi>  <utc seconds>  <pattern bits>
//!    <interval before h>  <interval after h>  <forward pois>  <backward pois>
//! ```
//!
//! `U` and `P` records appear in index order. `C` records list each user's
//! history in time order; the chronological split is recomputed from them
//! on load. In `S` records the pattern is seven `0`/`1` characters, context
//! lists are comma-separated POI indices (nearest first) and floats use
//! shortest round-trip formatting.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{
    split_corpus, Corpus, CorpusSplit, Segment, Sample, TemporalPattern, UserHistory, Visit,
};
use crate::error::{Error, Result};
use crate::geodata::{GeoPoint, PoiTable};

pub const MAGIC: &str = "STDDP1";

#[derive(Debug, Clone)]
pub struct PreparedCorpus {
    pub corpus: Corpus,
    pub split: CorpusSplit,
    pub window: usize,
    pub samples: Vec<Sample>,
}

impl PreparedCorpus {
    /// Splits `corpus` chronologically and builds every window-`w` sample.
    pub fn from_corpus(corpus: Corpus, window: usize) -> Result<Self> {
        let split = split_corpus(&corpus);
        let samples = super::build_samples(&corpus, &split, window)?;
        Ok(Self {
            corpus,
            split,
            window,
            samples,
        })
    }

    pub fn samples_in(&self, segment: Segment) -> Vec<&Sample> {
        self.samples.iter().filter(|s| s.segment == segment).collect()
    }

    pub fn to_text(&self) -> String {
        let c = &self.corpus;
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC}\t{}\t{}\t{}", c.num_users(), c.num_pois(), self.window);
        for (i, id) in c.user_ids.iter().enumerate() {
            let _ = writeln!(out, "U\t{i}\t{id}");
        }
        for (i, (id, p)) in c.pois.iter().enumerate() {
            let _ = writeln!(out, "P\t{i}\t{id}\t{}\t{}", p.lat(), p.lon());
        }
        for h in &c.histories {
            for v in &h.visits {
                let _ = writeln!(
                    out,
                    "C\t{}\t{}\t{}\t{}",
                    h.user, v.poi, v.utc_seconds, v.tz_offset_minutes
                );
            }
        }
        for s in &self.samples {
            let bits: String = s.pattern.bits().iter().map(|b| char::from(b'0' + b)).collect();
            let _ = writeln!(
                out,
                "S\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.segment,
                s.user,
                s.target,
                s.utc_seconds,
                bits,
                s.interval_before,
                s.interval_after,
                join(&s.forward),
                join(&s.backward)
            );
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        w.write_all(self.to_text().as_bytes())?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_text(&text).map_err(|reason| Error::Format {
            path: path.to_path_buf(),
            reason,
        })
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or("empty file")?;
        let head: Vec<&str> = header.split('\t').collect();
        if head.len() != 4 || head[0] != MAGIC {
            return Err(format!("missing {MAGIC} header"));
        }
        let n: usize = num(head[1])?;
        let m: usize = num(head[2])?;
        let window: usize = num(head[3])?;

        let mut user_ids = Vec::with_capacity(n);
        let mut pois = Vec::with_capacity(m);
        let mut histories: Vec<UserHistory> = (0..n)
            .map(|user| UserHistory {
                user,
                visits: Vec::new(),
            })
            .collect();
        let mut samples = Vec::new();

        for (i, line) in lines {
            let at = |e: String| format!("line {}: {e}", i + 1);
            let f: Vec<&str> = line.split('\t').collect();
            match f[0] {
                "U" if f.len() == 3 => {
                    if num::<usize>(f[1]).map_err(at)? != user_ids.len() {
                        return Err(at("user records out of order".into()));
                    }
                    user_ids.push(f[2].to_string());
                }
                "P" if f.len() == 5 => {
                    if num::<usize>(f[1]).map_err(at)? != pois.len() {
                        return Err(at("POI records out of order".into()));
                    }
                    let p = GeoPoint::new(num(f[3]).map_err(at)?, num(f[4]).map_err(at)?)
                        .map_err(|e| at(e.to_string()))?;
                    pois.push((f[2].to_string(), p));
                }
                "C" if f.len() == 5 => {
                    let user: usize = num(f[1]).map_err(at)?;
                    let poi: usize = num(f[2]).map_err(at)?;
                    if user >= n || poi >= m {
                        return Err(at("check-in index out of range".into()));
                    }
                    histories[user].visits.push(Visit {
                        poi,
                        utc_seconds: num(f[3]).map_err(at)?,
                        tz_offset_minutes: num(f[4]).map_err(at)?,
                    });
                }
                "S" if f.len() == 10 => {
                    let segment = Segment::parse(f[1]).ok_or_else(|| at("bad segment".into()))?;
                    let mut bits = [0u8; 7];
                    if f[5].len() != 7 {
                        return Err(at("pattern needs 7 bits".into()));
                    }
                    for (b, ch) in bits.iter_mut().zip(f[5].bytes()) {
                        *b = ch.wrapping_sub(b'0');
                    }
                    let pattern =
                        TemporalPattern::from_bits(bits).ok_or_else(|| at("invalid pattern".into()))?;
                    let sample = Sample {
                        segment,
                        user: num(f[2]).map_err(at)?,
                        target: num(f[3]).map_err(at)?,
                        utc_seconds: num(f[4]).map_err(at)?,
                        pattern,
                        interval_before: num(f[6]).map_err(at)?,
                        interval_after: num(f[7]).map_err(at)?,
                        forward: list(f[8]).map_err(at)?,
                        backward: list(f[9]).map_err(at)?,
                    };
                    let in_range = sample.user < n
                        && sample.target < m
                        && sample.forward.iter().chain(&sample.backward).all(|&p| p < m);
                    if !in_range || sample.forward.len() != window || sample.backward.len() != window {
                        return Err(at("sample indices or window inconsistent with header".into()));
                    }
                    samples.push(sample);
                }
                "" => {}
                other => return Err(at(format!("unrecognized record {other:?}"))),
            }
        }
        if user_ids.len() != n || pois.len() != m {
            return Err(format!(
                "header declares {n} users / {m} POIs, found {} / {}",
                user_ids.len(),
                pois.len()
            ));
        }
        let corpus = Corpus {
            pois: PoiTable::from_entries(pois).map_err(|e| e.to_string())?,
            user_ids,
            histories,
        };
        let split = split_corpus(&corpus);
        Ok(Self {
            corpus,
            split,
            window,
            samples,
        })
    }
}

fn num<T: std::str::FromStr>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("bad number {s:?}"))
}

fn list(s: &str) -> std::result::Result<Vec<usize>, String> {
    s.split(',').map(num).collect()
}

fn join(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{build_corpus, build_samples, CheckIn};

    fn prepared() -> PreparedCorpus {
        let mut pois = PoiTable::new();
        for p in 0..3 {
            pois.insert_or_get(&format!("v{p}"), GeoPoint::new(40.0 + p as f64 * 0.013, -73.9).unwrap());
        }
        let cs: Vec<CheckIn> = (0..12)
            .map(|i| CheckIn::new(format!("u{}", i % 2), format!("v{}", i % 3), 1_333_476_009 + i * 3917, -240).unwrap())
            .collect();
        let corpus = build_corpus(&pois, &cs).unwrap();
        let split = split_corpus(&corpus);
        let samples = build_samples(&corpus, &split, 1).unwrap();
        PreparedCorpus {
            corpus,
            split,
            window: 1,
            samples,
        }
    }

    #[test]
    fn text_round_trip() {
        let p = prepared();
        let text = p.to_text();
        assert!(text.starts_with("STDDP1\t2\t3\t1\n"));
        let back = PreparedCorpus::from_text(&text).unwrap();
        assert_eq!(back.samples, p.samples);
        assert_eq!(back.split, p.split);
        assert_eq!(back.corpus.histories, p.corpus.histories);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn rejects_bad_header_and_records() {
        assert!(PreparedCorpus::from_text("STDDP2\t1\t1\t1\n").is_err());
        let text = prepared().to_text().replace("\nS\ttrain", "\nS\tbogus");
        assert!(PreparedCorpus::from_text(&text).is_err());
    }
}
