use std::collections::HashMap;

use crate::geo::{haversine, GeoPoint, EARTH_RADIUS_M};

use super::EntityKind;

const CELL_DEG: f64 = 0.002;

#[derive(Debug, Clone, Copy)]
struct Entry {
    kind: EntityKind,
    slot: usize,
    point: GeoPoint,
}

/// Uniform lon/lat grid over point entities. Queries are filtered by exact
/// haversine distance, so results match a linear scan.
#[derive(Debug, Clone, Default)]
pub struct SpatialIndex {
    entries: Vec<Entry>,
    cells: HashMap<(i64, i64), Vec<u32>>,
    min_cell: (i64, i64),
    max_cell: (i64, i64),
}

fn cell_of(p: GeoPoint) -> (i64, i64) {
    ((p.lon / CELL_DEG).floor() as i64, (p.lat / CELL_DEG).floor() as i64)
}

impl SpatialIndex {
    pub(crate) fn build(items: impl IntoIterator<Item = (EntityKind, usize, GeoPoint)>) -> Self {
        let mut index = SpatialIndex { min_cell: (i64::MAX, i64::MAX), max_cell: (i64::MIN, i64::MIN), ..Default::default() };
        for (kind, slot, point) in items {
            let id = index.entries.len() as u32;
            index.entries.push(Entry { kind, slot, point });
            let c = cell_of(point);
            index.min_cell = (index.min_cell.0.min(c.0), index.min_cell.1.min(c.1));
            index.max_cell = (index.max_cell.0.max(c.0), index.max_cell.1.max(c.1));
            index.cells.entry(c).or_default().push(id);
        }
        index
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All entries of the accepted kinds within `radius` meters, unsorted.
    pub(crate) fn within(
        &self,
        center: GeoPoint,
        radius: f64,
        accept: impl Fn(EntityKind) -> bool,
    ) -> Vec<(EntityKind, usize, f64)> {
        let mut out = Vec::new();
        if self.entries.is_empty() || radius.is_nan() || radius < 0.0 {
            return out;
        }
        let mut visit = |e: &Entry| {
            if accept(e.kind) {
                let d = haversine(center, e.point);
                if d <= radius {
                    out.push((e.kind, e.slot, d));
                }
            }
        };
        match self.cell_range(center, radius) {
            Some((lo, hi)) => {
                let n_cells = (hi.0 - lo.0 + 1) as u128 * (hi.1 - lo.1 + 1) as u128;
                if n_cells > self.cells.len() as u128 {
                    self.cells.values().flatten().for_each(|&i| visit(&self.entries[i as usize]));
                } else {
                    for cx in lo.0..=hi.0 {
                        for cy in lo.1..=hi.1 {
                            if let Some(ids) = self.cells.get(&(cx, cy)) {
                                ids.iter().for_each(|&i| visit(&self.entries[i as usize]));
                            }
                        }
                    }
                }
            }
            None => self.entries.iter().for_each(visit),
        }
        out
    }

    /// Cell rectangle guaranteed to contain the query disk, clamped to occupied cells.
    /// `None` means the disk may wrap the antimeridian or a pole: scan everything.
    fn cell_range(&self, center: GeoPoint, radius: f64) -> Option<((i64, i64), (i64, i64))> {
        let ang = radius / EARTH_RADIUS_M;
        if ang >= std::f64::consts::FRAC_PI_2 {
            return None;
        }
        let dlat = ang.to_degrees() * 1.000_001 + 1e-9;
        let max_abs_lat = (center.lat.abs() + dlat).to_radians();
        if max_abs_lat >= std::f64::consts::FRAC_PI_2 {
            return None;
        }
        let s = ang.sin() / max_abs_lat.cos();
        if s >= 1.0 {
            return None;
        }
        let dlon = s.asin().to_degrees() * 1.000_001 + 1e-9;
        if center.lon - dlon < -180.0 || center.lon + dlon > 180.0 {
            return None;
        }
        let lo = cell_of(GeoPoint::new_unchecked(center.lon - dlon, center.lat - dlat));
        let hi = cell_of(GeoPoint::new_unchecked(center.lon + dlon, center.lat + dlat));
        let lo = (lo.0.max(self.min_cell.0), lo.1.max(self.min_cell.1));
        let hi = (hi.0.min(self.max_cell.0), hi.1.min(self.max_cell.1));
        if lo.0 > hi.0 || lo.1 > hi.1 {
            return Some(((0, 0), (-1, -1)));
        }
        Some((lo, hi))
    }
}
