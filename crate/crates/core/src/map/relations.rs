//! Derived relations over named roads, junctions and regions.

use std::collections::{BTreeMap, BTreeSet};

use crate::geo::{point_in_polygon, segment_distance, GeoPoint, LocalFrame};

use super::{Aoi, CityMap, RoadSegment};

impl CityMap {
    /// Distinct road names, sorted.
    pub fn road_names(&self) -> Vec<String> {
        self.roads().iter().map(|r| r.name.clone()).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn segments_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a RoadSegment> + 'a {
        self.roads().iter().filter(move |r| r.name == name)
    }

    /// Junctions where a named road terminates: incident to exactly one of its segments. Sorted.
    pub fn road_endpoints(&self, name: &str) -> Vec<String> {
        let mut degree: BTreeMap<&str, usize> = BTreeMap::new();
        for r in self.segments_named(name) {
            *degree.entry(&r.from).or_default() += 1;
            *degree.entry(&r.to).or_default() += 1;
        }
        degree.into_iter().filter(|(_, d)| *d == 1).map(|(j, _)| j.to_string()).collect()
    }

    /// Total length of all segments sharing a name.
    pub fn road_length(&self, name: &str) -> f64 {
        self.segments_named(name).map(|r| r.length_m).sum()
    }

    /// Other named roads sharing at least one junction with `name`. Sorted.
    pub fn connected_roads(&self, name: &str) -> Vec<String> {
        let mut out = BTreeSet::new();
        for r in self.segments_named(name) {
            for j in [&r.from, &r.to] {
                out.extend(self.junction_road_names(j).into_iter().filter(|n| n != name));
            }
        }
        out.into_iter().collect()
    }

    /// Distinct names of roads meeting at a junction. Sorted.
    pub fn junction_road_names(&self, junction: &str) -> Vec<String> {
        let Some(j) = self.junction(junction) else {
            return Vec::new();
        };
        j.incident_roads
            .iter()
            .filter_map(|rid| self.road(rid))
            .map(|r| r.name.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Road names with a segment within `max_gap_m` of the AoI boundary. Sorted.
    pub fn bordering_roads(&self, aoi: &Aoi, max_gap_m: f64) -> Vec<String> {
        let frame = LocalFrame::new(aoi.centroid);
        let ring: Vec<(f64, f64)> = aoi.boundary.iter().map(|p| frame.to_xy(*p)).collect();
        let mut out = BTreeSet::new();
        for r in self.roads() {
            let pts: Vec<(f64, f64)> = r.polyline.iter().map(|p| frame.to_xy(*p)).collect();
            if polyline_ring_distance(&pts, &ring) <= max_gap_m {
                out.insert(r.name.clone());
            }
        }
        out.into_iter().collect()
    }

    /// Minimum planar distance between two AoI polygons (0 when they overlap).
    pub fn aoi_gap(&self, a: &Aoi, b: &Aoi) -> f64 {
        let frame = LocalFrame::new(a.centroid);
        let ra: Vec<(f64, f64)> = a.boundary.iter().map(|p| frame.to_xy(*p)).collect();
        let rb: Vec<(f64, f64)> = b.boundary.iter().map(|p| frame.to_xy(*p)).collect();
        if point_in_polygon(rb[0], &ra) || point_in_polygon(ra[0], &rb) {
            return 0.0;
        }
        let mut closed = rb.clone();
        closed.push(rb[0]);
        polyline_ring_distance(&closed, &ra)
    }

    /// AoIs whose boundary contains the point.
    pub fn aois_containing(&self, p: GeoPoint) -> Vec<&Aoi> {
        self.aois()
            .iter()
            .filter(|a| {
                let frame = LocalFrame::new(a.centroid);
                let ring: Vec<(f64, f64)> = a.boundary.iter().map(|q| frame.to_xy(*q)).collect();
                point_in_polygon(frame.to_xy(p), &ring)
            })
            .collect()
    }

    /// Category histogram of an AoI's member PoIs, sorted by category.
    pub fn category_counts(&self, aoi: &Aoi) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for pid in &aoi.pois {
            if let Some(p) = self.poi(pid) {
                *counts.entry(p.category.clone()).or_default() += 1;
            }
        }
        counts
    }

    /// The strictly most frequent category of an AoI, if there is one.
    pub fn dominant_category(&self, aoi: &Aoi) -> Option<String> {
        let counts = self.category_counts(aoi);
        let max = *counts.values().max()?;
        let mut top = counts.iter().filter(|(_, c)| **c == max);
        let first = top.next()?;
        if top.next().is_some() {
            return None;
        }
        Some(first.0.clone())
    }

    /// Urban function implied by the dominant category.
    pub fn aoi_function(&self, aoi: &Aoi) -> Option<String> {
        self.dominant_category(aoi).and_then(|c| self.taxonomy().function_of(&c).map(str::to_string))
    }
}

fn polyline_ring_distance(line: &[(f64, f64)], ring: &[(f64, f64)]) -> f64 {
    let n = ring.len();
    let mut best = f64::INFINITY;
    for w in line.windows(2) {
        for i in 0..n {
            best = best.min(segment_distance(w[0], w[1], ring[i], ring[(i + 1) % n]));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use crate::map::{fixtures, parse_map, Taxonomy};

    #[test]
    fn toy_relations() {
        let m = parse_map(fixtures::toy_square().as_bytes(), Taxonomy::default()).unwrap();
        assert_eq!(m.road_endpoints("Elm St"), vec!["J1", "J2"]);
        assert_eq!(m.connected_roads("Elm St"), vec!["Birch Ave", "Oak Ave"]);
        assert_eq!(m.junction_road_names("J1"), vec!["Birch Ave", "Elm St"]);
        let a = &m.aois()[0];
        // the block is inset 5 m from Elm St and 20 m from the other three sides
        assert_eq!(m.bordering_roads(a, 10.0), vec!["Elm St"]);
        assert_eq!(m.bordering_roads(a, 30.0).len(), 4);
        assert_eq!(m.aois_containing(m.poi("P1").unwrap().location).len(), 1);
        // one food + one culture: no strict majority
        assert_eq!(m.dominant_category(a), None);
    }
}
