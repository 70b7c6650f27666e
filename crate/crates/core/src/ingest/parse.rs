use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::DateTime;

use super::CheckIn;
use crate::error::{Error, Result};
use crate::geodata::{GeoPoint, PoiTable};

/// Parsed corpus plus the lines that were skipped.
#[derive(Debug, Clone)]
pub struct ParseOutcome {
    /// POIs in first-seen order, with first-seen coordinates.
    pub pois: PoiTable,
    pub checkins: Vec<CheckIn>,
    /// `(1-based line number, reason)` for every skipped line.
    pub malformed: Vec<(usize, String)>,
}

impl ParseOutcome {
    pub fn malformed_count(&self) -> usize {
        self.malformed.len()
    }
}

struct RawRecord<'a> {
    user: &'a str,
    poi: &'a str,
    lat: &'a str,
    lon: &'a str,
    utc: i64,
    tz: i32,
}

/// Foursquare NYC/TKY dump: 8 tab-separated columns
/// `user, venue, category_id, category_name, lat, lon, tz_offset_minutes, utc_time`
/// with times like `Tue Apr 03 18:00:09 +0000 2012`.
pub fn parse_foursquare(path: impl AsRef<Path>) -> Result<ParseOutcome> {
    parse_foursquare_reader(File::open(path)?)
}

pub fn parse_foursquare_reader(reader: impl Read) -> Result<ParseOutcome> {
    parse_lines(reader, |cols| {
        if cols.len() != 8 {
            return Err(format!("expected 8 columns, found {}", cols.len()));
        }
        let tz: i32 = cols[6]
            .trim()
            .parse()
            .map_err(|_| format!("bad timezone offset {:?}", cols[6]))?;
        let utc = DateTime::parse_from_str(cols[7].trim(), "%a %b %d %H:%M:%S %z %Y")
            .map_err(|e| format!("bad time {:?}: {e}", cols[7]))?
            .timestamp();
        Ok(RawRecord {
            user: cols[0],
            poi: cols[1],
            lat: cols[4],
            lon: cols[5],
            utc,
            tz,
        })
    })
}

/// Gowalla dump: 5 tab-separated columns `user, ISO-8601 time, lat, lon, location`.
/// The dump has no timezone, so offsets are 0.
pub fn parse_gowalla(path: impl AsRef<Path>) -> Result<ParseOutcome> {
    parse_gowalla_reader(File::open(path)?)
}

pub fn parse_gowalla_reader(reader: impl Read) -> Result<ParseOutcome> {
    parse_lines(reader, |cols| {
        if cols.len() != 5 {
            return Err(format!("expected 5 columns, found {}", cols.len()));
        }
        let utc = DateTime::parse_from_rfc3339(cols[1].trim())
            .map_err(|e| format!("bad time {:?}: {e}", cols[1]))?
            .timestamp();
        Ok(RawRecord {
            user: cols[0],
            poi: cols[4],
            lat: cols[2],
            lon: cols[3],
            utc,
            tz: 0,
        })
    })
}

fn parse_lines<F>(reader: impl Read, mut split: F) -> Result<ParseOutcome>
where
    F: for<'a> FnMut(&[&'a str]) -> std::result::Result<RawRecord<'a>, String>,
{
    let mut reader = BufReader::new(reader);
    let mut pois = PoiTable::new();
    let mut checkins = Vec::new();
    let mut malformed = Vec::new();
    let mut buf = Vec::new();
    let mut line_no = 0;

    loop {
        buf.clear();
        if reader.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        // the Foursquare dumps are not guaranteed UTF-8
        let line = String::from_utf8_lossy(&buf);
        let line = line.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let parsed = split(&cols).and_then(|rec| {
            let lat: f64 = rec.lat.trim().parse().map_err(|_| format!("bad latitude {:?}", rec.lat))?;
            let lon: f64 = rec.lon.trim().parse().map_err(|_| format!("bad longitude {:?}", rec.lon))?;
            let point = GeoPoint::new(lat, lon).map_err(|e| e.to_string())?;
            let user = rec.user.trim();
            let poi = rec.poi.trim();
            if user.is_empty() || poi.is_empty() {
                return Err("empty user or POI id".to_string());
            }
            let checkin = CheckIn::new(user, poi, rec.utc, rec.tz).map_err(|e| e.to_string())?;
            Ok((checkin, point))
        });
        match parsed {
            Ok((checkin, point)) => {
                pois.insert_or_get(&checkin.poi_id, point);
                checkins.push(checkin);
            }
            Err(reason) => malformed.push((line_no, reason)),
        }
    }

    if checkins.is_empty() {
        return Err(Error::EmptyCorpus(Some(format!(
            "no valid check-ins ({} malformed lines)",
            malformed.len()
        ))));
    }
    Ok(ParseOutcome {
        pois,
        checkins,
        malformed,
    })
}
