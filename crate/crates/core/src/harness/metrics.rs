use std::collections::{BTreeMap, HashSet};

use crate::error::HarnessError;
use crate::geo::{haversine, planar_centroid, GeoPoint};

/// Smoothing mass added to every bin before renormalizing.
pub const JSD_EPSILON: f64 = 1e-12;

/// Fixed-width bins starting at `offset`; the last bin collects everything beyond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinScheme {
    pub offset: f64,
    pub width: f64,
    pub bins: usize,
}

/// Radius of gyration, 500 m bins up to 10 km plus overflow.
pub const RADIUS_BINS: BinScheme = BinScheme { offset: 0.0, width: 500.0, bins: 21 };
/// Step distance, 250 m bins up to 5 km plus overflow.
pub const DISTANCE_BINS: BinScheme = BinScheme { offset: 0.0, width: 250.0, bins: 21 };
/// Distinct locations per day, one bin per count 1..=20 plus overflow.
pub const DAILY_LOC_BINS: BinScheme = BinScheme { offset: 1.0, width: 1.0, bins: 21 };

pub fn histogram(values: &[f64], scheme: BinScheme) -> Vec<f64> {
    let mut h = vec![0.0; scheme.bins];
    for &v in values {
        let idx = ((v - scheme.offset) / scheme.width).floor().max(0.0) as usize;
        h[idx.min(scheme.bins - 1)] += 1.0;
    }
    h
}

/// Normalize, then add `JSD_EPSILON` to every bin and renormalize.
fn smoothed(h: &[f64]) -> Vec<f64> {
    let mass: f64 = h.iter().sum();
    let total = 1.0 + JSD_EPSILON * h.len() as f64;
    h.iter().map(|x| (x / mass + JSD_EPSILON) / total).collect()
}

fn kl(p: &[f64], m: &[f64]) -> f64 {
    p.iter().zip(m).map(|(a, b)| if *a > 0.0 { a * (a / b).log2() } else { 0.0 }).sum()
}

/// Jensen-Shannon divergence in bits between two histograms (counts or
/// probabilities), clamped to [0, 1].
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64, HarnessError> {
    if p.len() != q.len() {
        return Err(HarnessError::BinMismatch(p.len(), q.len()));
    }
    if p.iter().chain(q).any(|x| !x.is_finite() || *x < 0.0) {
        return Err(HarnessError::InvalidHistogram);
    }
    if p.iter().sum::<f64>() == 0.0 || q.iter().sum::<f64>() == 0.0 {
        return Err(HarnessError::EmptyHistogram);
    }
    let (p, q) = (smoothed(p), smoothed(q));
    let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| (a + b) / 2.0).collect();
    Ok((0.5 * kl(&p, &m) + 0.5 * kl(&q, &m)).clamp(0.0, 1.0))
}

/// Root-mean-square distance of the points from their centroid, in meters.
pub fn radius_of_gyration(points: &[GeoPoint]) -> Option<f64> {
    let c = planar_centroid(points)?;
    let ms = points.iter().map(|p| haversine(*p, c).powi(2)).sum::<f64>() / points.len() as f64;
    Some(ms.sqrt())
}

/// Distances between consecutive points.
pub fn step_distances(points: &[GeoPoint]) -> Vec<f64> {
    points.windows(2).map(|w| haversine(w[0], w[1])).collect()
}

/// Distinct places per (subject, day); `visits` holds (subject, day, place).
pub fn daily_locations<'a>(visits: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>) -> Vec<f64> {
    let mut days: BTreeMap<(&str, &str), HashSet<&str>> = BTreeMap::new();
    for (subject, day, place) in visits {
        days.entry((subject, day)).or_default().insert(place);
    }
    days.values().map(|s| s.len() as f64).collect()
}
