//! Immutable in-memory city model: PoIs, AoIs, junctions and road segments,
//! with a spatial index and road-network based addresses.

mod address;
mod import;
mod index;
mod relations;
pub mod synthetic;
mod taxonomy;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::MapError;
use crate::geo::{planar_centroid, GeoPoint, LocalFrame};

pub use address::{reconstruct_address, AddressDescriptor, Side, ON_ROAD_TOLERANCE_M};
pub use import::{export_map, import_map, import_map_with, parse_map, write_map_jsonl, MapRecord};
pub use index::SpatialIndex;
pub use taxonomy::{CategoryDef, Taxonomy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Poi,
    Aoi,
    Junction,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Poi => "poi",
            EntityKind::Aoi => "aoi",
            EntityKind::Junction => "junction",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poi {
    pub id: String,
    pub name: String,
    pub category: String,
    pub location: GeoPoint,
    pub address: Option<AddressDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aoi {
    pub id: String,
    pub name: String,
    /// Polygon ring without the repeated closing vertex.
    pub boundary: Vec<GeoPoint>,
    pub pois: Vec<String>,
    pub centroid: GeoPoint,
    pub address: Option<AddressDescriptor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Junction {
    pub id: String,
    pub location: GeoPoint,
    /// Sorted segment ids.
    pub incident_roads: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadSegment {
    pub id: String,
    pub name: String,
    pub from: String,
    pub to: String,
    pub length_m: f64,
    pub polyline: Vec<GeoPoint>,
}

impl RoadSegment {
    pub fn other_end(&self, junction: &str) -> Option<&str> {
        if self.from == junction {
            Some(&self.to)
        } else if self.to == junction {
            Some(&self.from)
        } else {
            None
        }
    }

    /// Point reached by walking `offset` meters from `anchor` along the road.
    /// Offsets are measured on the nominal `length_m` scale.
    pub fn point_at(&self, anchor: &str, offset: f64) -> Option<GeoPoint> {
        let frac = (offset / self.length_m).clamp(0.0, 1.0);
        let frac_from_start = if anchor == self.from {
            frac
        } else if anchor == self.to {
            1.0 - frac
        } else {
            return None;
        };
        let frame = LocalFrame::new(self.polyline[0]);
        let pts: Vec<(f64, f64)> = self.polyline.iter().map(|p| frame.to_xy(*p)).collect();
        let lens: Vec<f64> = pts.windows(2).map(|w| ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt()).collect();
        let total: f64 = lens.iter().sum();
        let mut remaining = frac_from_start * total;
        for (i, len) in lens.iter().enumerate() {
            if remaining <= *len || i == lens.len() - 1 {
                let t = if *len > 0.0 { (remaining / len).clamp(0.0, 1.0) } else { 0.0 };
                let (a, b) = (pts[i], pts[i + 1]);
                return Some(frame.to_geo(a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
            }
            remaining -= len;
        }
        None
    }
}

/// A point entity returned by proximity queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearbyEntity {
    pub id: String,
    pub kind: EntityKind,
    pub distance_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: GeoPoint,
    pub max: GeoPoint,
}

/// The city world model. Immutable once built; all collections are sorted by id.
#[derive(Debug, Clone)]
pub struct CityMap {
    pois: Vec<Poi>,
    aois: Vec<Aoi>,
    junctions: Vec<Junction>,
    roads: Vec<RoadSegment>,
    poi_slot: HashMap<String, usize>,
    aoi_slot: HashMap<String, usize>,
    junction_slot: HashMap<String, usize>,
    road_slot: HashMap<String, usize>,
    taxonomy: Taxonomy,
    index: SpatialIndex,
    bbox: Option<BoundingBox>,
}

impl PartialEq for CityMap {
    fn eq(&self, other: &Self) -> bool {
        self.pois == other.pois
            && self.aois == other.aois
            && self.junctions == other.junctions
            && self.roads == other.roads
            && self.taxonomy == other.taxonomy
    }
}

fn slots<T>(items: &[T], id: impl Fn(&T) -> &str) -> HashMap<String, usize> {
    items.iter().enumerate().map(|(i, x)| (id(x).to_string(), i)).collect()
}

impl CityMap {
    /// Assemble a map from already validated parts: sorts, links junctions to
    /// roads, builds the index and reconstructs addresses.
    pub(crate) fn assemble(
        mut pois: Vec<Poi>,
        mut aois: Vec<Aoi>,
        mut junctions: Vec<Junction>,
        mut roads: Vec<RoadSegment>,
        taxonomy: Taxonomy,
    ) -> Result<Self, MapError> {
        pois.sort_by(|a, b| a.id.cmp(&b.id));
        aois.sort_by(|a, b| a.id.cmp(&b.id));
        junctions.sort_by(|a, b| a.id.cmp(&b.id));
        roads.sort_by(|a, b| a.id.cmp(&b.id));

        let junction_slot = slots(&junctions, |j| &j.id);
        for j in &mut junctions {
            j.incident_roads.clear();
        }
        for r in &roads {
            for end in [&r.from, &r.to] {
                let slot = *junction_slot.get(end).ok_or_else(|| MapError::UnknownEntity { kind: "junction", id: end.clone() })?;
                let list = &mut junctions[slot].incident_roads;
                if list.last() != Some(&r.id) {
                    list.push(r.id.clone());
                }
            }
        }
        if let Some(j) = junctions.iter().find(|j| j.incident_roads.is_empty()) {
            return Err(MapError::IsolatedJunction(j.id.clone()));
        }
        for a in &mut aois {
            a.centroid = polygon_centroid(&a.boundary);
        }

        let index = SpatialIndex::build(
            pois.iter()
                .enumerate()
                .map(|(i, p)| (EntityKind::Poi, i, p.location))
                .chain(aois.iter().enumerate().map(|(i, a)| (EntityKind::Aoi, i, a.centroid)))
                .chain(junctions.iter().enumerate().map(|(i, j)| (EntityKind::Junction, i, j.location))),
        );
        let bbox = bounding_box(
            pois.iter()
                .map(|p| p.location)
                .chain(aois.iter().flat_map(|a| a.boundary.iter().copied()))
                .chain(junctions.iter().map(|j| j.location))
                .chain(roads.iter().flat_map(|r| r.polyline.iter().copied())),
        );

        let mut map = CityMap {
            poi_slot: slots(&pois, |p| &p.id),
            aoi_slot: slots(&aois, |a| &a.id),
            junction_slot,
            road_slot: slots(&roads, |r| &r.id),
            pois,
            aois,
            junctions,
            roads,
            taxonomy,
            index,
            bbox,
        };
        if !map.roads.is_empty() {
            let poi_addr: Vec<_> = map.pois.iter().map(|p| reconstruct_address(p.location, &map).ok()).collect();
            let aoi_addr: Vec<_> = map.aois.iter().map(|a| reconstruct_address(a.centroid, &map).ok()).collect();
            for (p, addr) in map.pois.iter_mut().zip(poi_addr) {
                p.address = addr;
            }
            for (a, addr) in map.aois.iter_mut().zip(aoi_addr) {
                a.address = addr;
            }
        }
        Ok(map)
    }

    pub fn pois(&self) -> &[Poi] {
        &self.pois
    }

    pub fn aois(&self) -> &[Aoi] {
        &self.aois
    }

    pub fn junctions(&self) -> &[Junction] {
        &self.junctions
    }

    pub fn roads(&self) -> &[RoadSegment] {
        &self.roads
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn index(&self) -> &SpatialIndex {
        &self.index
    }

    pub fn bounding_box(&self) -> Option<BoundingBox> {
        self.bbox
    }

    pub fn poi(&self, id: &str) -> Option<&Poi> {
        self.poi_slot.get(id).map(|&i| &self.pois[i])
    }

    pub fn aoi(&self, id: &str) -> Option<&Aoi> {
        self.aoi_slot.get(id).map(|&i| &self.aois[i])
    }

    pub fn junction(&self, id: &str) -> Option<&Junction> {
        self.junction_slot.get(id).map(|&i| &self.junctions[i])
    }

    pub fn road(&self, id: &str) -> Option<&RoadSegment> {
        self.road_slot.get(id).map(|&i| &self.roads[i])
    }

    pub fn junction_slot(&self, id: &str) -> Option<usize> {
        self.junction_slot.get(id).copied()
    }

    /// Location of a point entity (AoIs are represented by their centroid).
    pub fn location_of(&self, kind: EntityKind, id: &str) -> Option<GeoPoint> {
        match kind {
            EntityKind::Poi => self.poi(id).map(|p| p.location),
            EntityKind::Aoi => self.aoi(id).map(|a| a.centroid),
            EntityKind::Junction => self.junction(id).map(|j| j.location),
        }
    }

    pub fn entity_count(&self) -> usize {
        self.pois.len() + self.aois.len() + self.junctions.len() + self.roads.len()
    }

    fn slot_id(&self, kind: EntityKind, slot: usize) -> &str {
        match kind {
            EntityKind::Poi => &self.pois[slot].id,
            EntityKind::Aoi => &self.aois[slot].id,
            EntityKind::Junction => &self.junctions[slot].id,
        }
    }

    /// Entities of the given kinds within `radius` meters, ascending by
    /// distance, ties broken by id then kind.
    pub fn nearby_entities(&self, center: GeoPoint, radius: f64, kinds: &[EntityKind]) -> Vec<NearbyEntity> {
        let mut hits: Vec<NearbyEntity> = self
            .index
            .within(center, radius, |k| kinds.contains(&k))
            .into_iter()
            .map(|(kind, slot, d)| NearbyEntity { id: self.slot_id(kind, slot).to_string(), kind, distance_m: d })
            .collect();
        sort_nearby(&mut hits);
        hits
    }

    /// The `k` entities of the given kinds closest to `center`.
    pub fn nearest_of_kinds(&self, center: GeoPoint, k: usize, kinds: &[EntityKind]) -> Vec<NearbyEntity> {
        let available: usize = kinds
            .iter()
            .map(|k| match k {
                EntityKind::Poi => self.pois.len(),
                EntityKind::Aoi => self.aois.len(),
                EntityKind::Junction => self.junctions.len(),
            })
            .sum();
        let k = k.min(available);
        if k == 0 {
            return Vec::new();
        }
        let mut radius = 250.0;
        loop {
            let mut hits = self.nearby_entities(center, radius, kinds);
            if hits.len() >= k || radius > std::f64::consts::PI * crate::geo::EARTH_RADIUS_M {
                hits.truncate(k);
                return hits;
            }
            radius *= 2.0;
        }
    }

    /// The `k` PoIs closest to `center`, ties broken by id.
    pub fn nearest_pois(&self, center: GeoPoint, k: usize) -> Result<Vec<String>, MapError> {
        if k > self.pois.len() {
            return Err(MapError::NotEnoughPois { requested: k, available: self.pois.len() });
        }
        Ok(self.nearest_of_kinds(center, k, &[EntityKind::Poi]).into_iter().map(|e| e.id).collect())
    }

    pub fn nearest_junction(&self, center: GeoPoint) -> Option<NearbyEntity> {
        self.nearest_of_kinds(center, 1, &[EntityKind::Junction]).into_iter().next()
    }

    /// Linear-scan reference used by tests and for tiny maps.
    pub fn scan_nearby(&self, center: GeoPoint, radius: f64, kinds: &[EntityKind]) -> Vec<NearbyEntity> {
        let mut hits = Vec::new();
        let mut push = |kind: EntityKind, id: &str, p: GeoPoint| {
            let d = crate::geo::haversine(center, p);
            if kinds.contains(&kind) && d <= radius {
                hits.push(NearbyEntity { id: id.to_string(), kind, distance_m: d });
            }
        };
        self.pois.iter().for_each(|p| push(EntityKind::Poi, &p.id, p.location));
        self.aois.iter().for_each(|a| push(EntityKind::Aoi, &a.id, a.centroid));
        self.junctions.iter().for_each(|j| push(EntityKind::Junction, &j.id, j.location));
        sort_nearby(&mut hits);
        hits
    }

    /// Local frame centered on the map's bounding-box center.
    pub fn frame(&self) -> LocalFrame {
        let center = self
            .bbox
            .map(|b| GeoPoint::new_unchecked((b.min.lon + b.max.lon) / 2.0, (b.min.lat + b.max.lat) / 2.0))
            .unwrap_or(GeoPoint::new_unchecked(0.0, 0.0));
        LocalFrame::new(center)
    }
}

fn sort_nearby(hits: &mut [NearbyEntity]) {
    hits.sort_by(|a, b| a.distance_m.total_cmp(&b.distance_m).then_with(|| a.id.cmp(&b.id)).then_with(|| a.kind.cmp(&b.kind)));
}

fn bounding_box(points: impl Iterator<Item = GeoPoint>) -> Option<BoundingBox> {
    points.fold(None, |acc, p| {
        Some(match acc {
            None => BoundingBox { min: p, max: p },
            Some(b) => BoundingBox {
                min: GeoPoint::new_unchecked(b.min.lon.min(p.lon), b.min.lat.min(p.lat)),
                max: GeoPoint::new_unchecked(b.max.lon.max(p.lon), b.max.lat.max(p.lat)),
            },
        })
    })
}

/// Area centroid of a simple polygon; falls back to the vertex mean for degenerate rings.
pub fn polygon_centroid(ring: &[GeoPoint]) -> GeoPoint {
    let Some(first) = ring.first() else {
        return GeoPoint::new_unchecked(0.0, 0.0);
    };
    let frame = LocalFrame::new(*first);
    let pts: Vec<(f64, f64)> = ring.iter().map(|p| frame.to_xy(*p)).collect();
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..pts.len() {
        let (x0, y0) = pts[i];
        let (x1, y1) = pts[(i + 1) % pts.len()];
        let cross = x0 * y1 - x1 * y0;
        a2 += cross;
        cx += (x0 + x1) * cross;
        cy += (y0 + y1) * cross;
    }
    if a2.abs() < 1e-9 {
        return planar_centroid(ring).unwrap_or(*first);
    }
    frame.to_geo(cx / (3.0 * a2), cy / (3.0 * a2))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::haversine;

    fn toy() -> CityMap {
        parse_map(fixtures::toy_square().as_bytes(), Taxonomy::default()).unwrap()
    }

    #[test]
    fn toy_square_counts() {
        let m = toy();
        assert_eq!(m.junctions().len(), 4);
        assert_eq!(m.roads().len(), 4);
        assert_eq!(m.pois().len(), 2);
        assert_eq!(m.aois().len(), 1);
        assert_eq!(m.index().len(), 4 + 2 + 1);
        for j in m.junctions() {
            assert_eq!(j.incident_roads.len(), 2);
        }
    }

    #[test]
    fn nearby_tiny_radius_returns_self() {
        let m = toy();
        let p = m.poi("P1").unwrap().location;
        let hits = m.nearby_entities(p, 0.001, &[EntityKind::Poi, EntityKind::Aoi, EntityKind::Junction]);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].id, "P1");
    }

    #[test]
    fn nearby_huge_radius_returns_all_of_kind() {
        let m = toy();
        let hits = m.nearby_entities(m.junctions()[0].location, 1e6, &[EntityKind::Junction]);
        assert_eq!(hits.len(), 4);
        assert!(hits.windows(2).all(|w| w[0].distance_m <= w[1].distance_m));
    }

    #[test]
    fn nearest_pois_contract() {
        let m = toy();
        let at = m.poi("P2").unwrap().location;
        assert_eq!(m.nearest_pois(at, 1).unwrap(), vec!["P2".to_string()]);
        assert_eq!(m.nearest_pois(at, 2).unwrap(), vec!["P2".to_string(), "P1".to_string()]);
        assert!(matches!(m.nearest_pois(at, 3), Err(MapError::NotEnoughPois { requested: 3, available: 2 })));
    }

    #[test]
    fn point_at_walks_polyline() {
        let m = toy();
        let r = m.road("R1").unwrap();
        let mid = r.point_at("J1", r.length_m / 2.0).unwrap();
        let a = m.junction("J1").unwrap().location;
        assert!((haversine(a, mid) - r.length_m / 2.0).abs() < 0.01);
        let from_other = r.point_at("J2", r.length_m / 2.0).unwrap();
        assert!(haversine(mid, from_other) < 1e-6);
    }
}
