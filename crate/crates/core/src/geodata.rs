//! POI coordinates, great-circle distance and normalized distance rows.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex};

use lru::LruCache;

use crate::error::{Error, Result};

pub const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !(lat.is_finite() && (-90.0..=90.0).contains(&lat)) {
            return Err(Error::InvalidInput(format!("latitude {lat} out of range")));
        }
        if !(lon.is_finite() && (-180.0..=180.0).contains(&lon)) {
            return Err(Error::InvalidInput(format!("longitude {lon} out of range")));
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// Haversine distance on a sphere of radius 6371 km.
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (lat1, lat2) = (a.lat.to_radians(), b.lat.to_radians());
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Dense POI index ↔ external id, with coordinates.
#[derive(Debug, Clone, Default)]
pub struct PoiTable {
    entries: Vec<(String, GeoPoint)>,
    index: HashMap<String, usize>,
}

impl PoiTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a POI unless the id is already known; returns its index either way.
    pub fn insert_or_get(&mut self, id: &str, point: GeoPoint) -> usize {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.entries.len();
        self.entries.push((id.to_string(), point));
        self.index.insert(id.to_string(), i);
        i
    }

    /// Builds a table from an ordered list; duplicate ids are an error.
    pub fn from_entries(entries: Vec<(String, GeoPoint)>) -> Result<Self> {
        let mut table = Self::new();
        for (id, p) in entries {
            if table.index.contains_key(&id) {
                return Err(Error::InvalidInput(format!("duplicate POI id {id}")));
            }
            table.insert_or_get(&id, p);
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, idx: usize) -> &str {
        &self.entries[idx].0
    }

    pub fn point(&self, idx: usize) -> GeoPoint {
        self.entries[idx].1
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, GeoPoint)> {
        self.entries.iter().map(|(id, p)| (id.as_str(), *p))
    }

    /// Raw distance row `D_p` in km.
    pub fn distance_row(&self, p: usize) -> Vec<f64> {
        let origin = self.point(p);
        self.entries
            .iter()
            .map(|(_, q)| haversine_km(origin, *q))
            .collect()
    }
}

/// `D_p / σ(D_p)` with σ the population standard deviation over all M entries.
pub fn spatial_vector(p: usize, table: &PoiTable) -> Result<Vec<f64>> {
    if p >= table.len() {
        return Err(Error::ShapeMismatch(format!(
            "POI index {p} outside table of {}",
            table.len()
        )));
    }
    let mut row = table.distance_row(p);
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sigma = var.sqrt();
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::DegenerateGeometry { poi: p });
    }
    row.iter_mut().for_each(|x| *x /= sigma);
    Ok(row)
}

/// Bounded LRU of normalized spatial rows, shareable across threads.
#[derive(Debug)]
pub struct SpatialRowCache {
    rows: Mutex<LruCache<usize, Arc<Vec<f64>>>>,
}

impl SpatialRowCache {
    pub const DEFAULT_CAPACITY: usize = 4096;

    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).unwrap();
        Self {
            rows: Mutex::new(LruCache::new(cap)),
        }
    }

    pub fn get(&self, p: usize, table: &PoiTable) -> Result<Arc<Vec<f64>>> {
        if let Some(row) = self.rows.lock().unwrap().get(&p) {
            return Ok(Arc::clone(row));
        }
        // computed outside the lock; a concurrent miss on the same row just
        // produces an identical vector
        let row = Arc::new(spatial_vector(p, table)?);
        self.rows.lock().unwrap().put(p, Arc::clone(&row));
        Ok(row)
    }

    pub fn len(&self) -> usize {
        self.rows.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for SpatialRowCache {
    fn default() -> Self {
        Self::new(Self::DEFAULT_CAPACITY)
    }
}
