//! Seeded synthetic city: a jittered street lattice with named streets and
//! avenues, block-shaped AoIs with a dominant PoI category, and scattered PoIs.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::MapError;
use crate::geo::{haversine, GeoPoint, LocalFrame};

use super::{parse_map, write_map_jsonl, CityMap, MapRecord, Taxonomy};

const STREET_WORDS: [&str; 40] = [
    "Elm", "Oak", "Pine", "Maple", "Cedar", "Birch", "Willow", "Ash", "Spruce", "Laurel", "Juniper", "Magnolia", "Poplar",
    "Chestnut", "Hazel", "Linden", "Alder", "Sycamore", "Hawthorn", "Cypress", "Rowan", "Holly", "Aspen", "Walnut",
    "Hickory", "Beech", "Fir", "Larch", "Myrtle", "Olive", "Palm", "Redwood", "Sequoia", "Tamarack", "Yew", "Acacia",
    "Banyan", "Catalpa", "Dogwood", "Elder",
];
const AVENUE_WORDS: [&str; 40] = [
    "Harbor", "Summit", "Meadow", "River", "Lake", "Canal", "Bridge", "Market", "Garden", "Station", "Temple", "Castle",
    "Forest", "Valley", "Hill", "Park", "Spring", "Mill", "Orchard", "Quarry", "Colony", "Union", "Liberty", "Beacon",
    "Crown", "Empire", "Franklin", "Granite", "Heritage", "Ivory", "Jade", "Kingston", "Lincoln", "Monroe", "Newton",
    "Oxford", "Prospect", "Queens", "Regent", "Sterling",
];
const NAME_ADJ: [&str; 24] = [
    "Golden", "Silver", "Red", "Blue", "Green", "Sunny", "Quiet", "Grand", "Little", "Old", "New", "Royal", "Happy",
    "Bright", "Lucky", "Jade", "Pearl", "Crystal", "Velvet", "Amber", "Coral", "Misty", "Noble", "Urban",
];
const NAME_NOUN: [&str; 24] = [
    "Lotus", "Dragon", "Phoenix", "Crane", "Tiger", "Bamboo", "Lantern", "Bell", "Cloud", "River", "Stone", "Maple",
    "Orchid", "Peony", "Willow", "Harbor", "Garden", "Bridge", "Tower", "Gate", "Star", "Moon", "Sun", "Pine",
];
const DISTRICT_SUFFIX: [&str; 6] = ["District", "Quarter", "Park", "Plaza", "Court", "Commons"];

fn category_noun(category: &str) -> &'static str {
    match category {
        "residential" => "Apartments",
        "food" => "Restaurant",
        "shopping" => "Mall",
        "business" => "Office Center",
        "education" => "School",
        "medical" => "Clinic",
        "entertainment" => "Cinema",
        "transport" => "Station",
        "hotel" => "Hotel",
        "sport" => "Gym",
        "culture" => "Museum",
        "public-service" => "Service Hall",
        _ => "Place",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCityConfig {
    /// Junction lattice rows and columns.
    pub rows: usize,
    pub cols: usize,
    pub spacing_m: f64,
    /// Fraction of the spacing each junction may be jittered by.
    pub jitter: f64,
    pub aoi_count: usize,
    pub poi_count: usize,
    pub origin: GeoPoint,
    pub seed: u64,
}

impl Default for SyntheticCityConfig {
    fn default() -> Self {
        Self::with_entity_count(5000, 7)
    }
}

impl SyntheticCityConfig {
    /// Size the lattice so that junctions + roads + AoIs + PoIs ≈ `n`.
    pub fn with_entity_count(n: usize, seed: u64) -> Self {
        let g = ((n as f64 / 8.0).sqrt().floor() as usize).clamp(3, 40);
        let junctions = g * g;
        let roads = 2 * g * (g - 1);
        let aoi_count = ((g - 1) * (g - 1)) / 2;
        let poi_count = n.saturating_sub(junctions + roads + aoi_count).max(aoi_count * 3 + 2);
        Self {
            rows: g,
            cols: g,
            spacing_m: 200.0,
            jitter: 0.12,
            aoi_count,
            poi_count,
            origin: GeoPoint::new_unchecked(116.30, 39.90),
            seed,
        }
    }

    pub fn generate(&self) -> Vec<MapRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let frame = LocalFrame::new(self.origin);
        let taxonomy = Taxonomy::default();
        let categories: Vec<&str> = taxonomy.names().collect();
        let (rows, cols) = (self.rows.max(2), self.cols.max(2));
        let jid = |r: usize, c: usize| format!("J{:04}", r * cols + c);

        let mut xy = vec![vec![(0.0, 0.0); cols]; rows];
        let mut records = Vec::new();
        for (r, row) in xy.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                let jx = rng.random_range(-self.jitter..=self.jitter) * self.spacing_m;
                let jy = rng.random_range(-self.jitter..=self.jitter) * self.spacing_m;
                *cell = (c as f64 * self.spacing_m + jx, r as f64 * self.spacing_m + jy);
                let p = frame.to_geo(cell.0, cell.1);
                records.push(MapRecord::Junction { id: jid(r, c), lon: p.lon, lat: p.lat });
            }
        }
        let geo = |p: (f64, f64)| frame.to_geo(p.0, p.1);

        let mut road_no = 0usize;
        let mut push_road = |records: &mut Vec<MapRecord>, name: String, a: (usize, usize), b: (usize, usize)| {
            let (pa, pb) = (geo(xy[a.0][a.1]), geo(xy[b.0][b.1]));
            road_no += 1;
            records.push(MapRecord::Road {
                id: format!("R{road_no:04}"),
                name,
                from: jid(a.0, a.1),
                to: jid(b.0, b.1),
                polyline: vec![[pa.lon, pa.lat], [pb.lon, pb.lat]],
                length_m: haversine(pa, pb),
            });
        };
        for r in 0..rows {
            let name = format!("{} Street", word(&STREET_WORDS, r));
            for c in 0..cols - 1 {
                push_road(&mut records, name.clone(), (r, c), (r, c + 1));
            }
        }
        for c in 0..cols {
            let name = format!("{} Avenue", word(&AVENUE_WORDS, c));
            for r in 0..rows - 1 {
                push_road(&mut records, name.clone(), (r, c), (r + 1, c));
            }
        }

        // Blocks shrunk toward their centroid so that streets stay outside.
        let block_ring = |r: usize, c: usize, inset: f64| -> Vec<(f64, f64)> {
            let corners = [xy[r][c], xy[r][c + 1], xy[r + 1][c + 1], xy[r + 1][c]];
            let cx = corners.iter().map(|p| p.0).sum::<f64>() / 4.0;
            let cy = corners.iter().map(|p| p.1).sum::<f64>() / 4.0;
            corners.iter().map(|p| (cx + (p.0 - cx) * inset, cy + (p.1 - cy) * inset)).collect()
        };
        let mut blocks: Vec<(usize, usize)> = (0..rows - 1).flat_map(|r| (0..cols - 1).map(move |c| (r, c))).collect();
        blocks.shuffle(&mut rng);
        let aoi_blocks: Vec<(usize, usize)> = blocks.iter().copied().take(self.aoi_count.min(blocks.len())).collect();
        let free_blocks: Vec<(usize, usize)> = blocks.iter().copied().skip(aoi_blocks.len()).collect();

        let mut names = HashSet::new();
        let mut fresh_name = |rng: &mut ChaCha8Rng, noun: &str| -> String {
            loop {
                let base = format!("{} {} {}", NAME_ADJ.choose(rng).unwrap(), NAME_NOUN.choose(rng).unwrap(), noun);
                if names.insert(base.clone()) {
                    return base;
                }
                for k in 2.. {
                    let n = format!("{base} {k}");
                    if names.insert(n.clone()) {
                        return n;
                    }
                }
            }
        };

        let mut poi_no = 0usize;
        let mut poi_records = Vec::new();
        let mut aoi_records = Vec::new();
        let mut place_poi = |rng: &mut ChaCha8Rng, ring: &[(f64, f64)], category: &str, out: &mut Vec<MapRecord>| -> String {
            poi_no += 1;
            let id = format!("P{poi_no:05}");
            let p = sample_in_quad(rng, ring);
            let g = geo(p);
            let name = fresh_name(rng, category_noun(category));
            out.push(MapRecord::Poi { id: id.clone(), name, category: category.to_string(), lon: g.lon, lat: g.lat });
            id
        };

        let budget_in_aois = self.poi_count.saturating_sub(free_blocks.len().min(self.poi_count / 5));
        let (base, extra) = match aoi_blocks.len() {
            0 => (0, 0),
            n => (budget_in_aois / n, budget_in_aois % n),
        };
        let mut placed = 0usize;
        let mut aoi_names = HashSet::new();
        for (k, &(r, c)) in aoi_blocks.iter().enumerate() {
            let ring = block_ring(r, c, 0.8);
            let n_in = (base + usize::from(k < extra)).max(3);
            let dominant = *categories.choose(&mut rng).unwrap();
            let n_dom = n_in / 2 + 1;
            let mut members = Vec::new();
            for i in 0..n_in {
                let cat = if i < n_dom {
                    dominant
                } else {
                    *categories.iter().filter(|c| **c != dominant).collect::<Vec<_>>().choose(&mut rng).unwrap()
                };
                members.push(place_poi(&mut rng, &ring, cat, &mut poi_records));
            }
            placed += n_in;
            let name = loop {
                let n = format!("{} {}", word(&AVENUE_WORDS, rng.random_range(0..400)), DISTRICT_SUFFIX.choose(&mut rng).unwrap());
                if aoi_names.insert(n.clone()) {
                    break n;
                }
            };
            aoi_records.push(MapRecord::Aoi {
                id: format!("A{:04}", k + 1),
                name,
                boundary: ring.iter().map(|p| geo(*p)).map(|g| [g.lon, g.lat]).collect(),
                pois: members,
            });
        }
        let leftover = self.poi_count.saturating_sub(placed);
        for i in 0..leftover {
            let (r, c) = if free_blocks.is_empty() { aoi_blocks[i % aoi_blocks.len()] } else { free_blocks[i % free_blocks.len()] };
            // outside every AoI: use the band between the street and the AoI ring
            let ring = if free_blocks.is_empty() { band_ring(&block_ring(r, c, 0.9), &block_ring(r, c, 0.85)) } else { block_ring(r, c, 0.8) };
            let cat = *categories.choose(&mut rng).unwrap();
            place_poi(&mut rng, &ring, cat, &mut poi_records);
        }

        records.extend(poi_records);
        records.extend(aoi_records);
        records
    }

    pub fn build(&self) -> Result<CityMap, MapError> {
        let records = self.generate();
        let mut buf = Vec::new();
        write_map_jsonl(&records, &mut buf).expect("in-memory write");
        parse_map(buf.as_slice(), Taxonomy::default())
    }
}

fn word(list: &[&str], i: usize) -> String {
    let base = list[i % list.len()];
    match i / list.len() {
        0 => base.to_string(),
        k => format!("{base} {}", k + 1),
    }
}

// The outer edge of a thin band: one side of the outer ring, nudged inward.
fn band_ring(outer: &[(f64, f64)], inner: &[(f64, f64)]) -> Vec<(f64, f64)> {
    vec![outer[0], outer[1], inner[1], inner[0]]
}

/// Uniform-ish point inside a convex quad via bilinear interpolation.
fn sample_in_quad(rng: &mut ChaCha8Rng, q: &[(f64, f64)]) -> (f64, f64) {
    let u: f64 = rng.random_range(0.05..0.95);
    let v: f64 = rng.random_range(0.05..0.95);
    let top = (q[0].0 + (q[1].0 - q[0].0) * u, q[0].1 + (q[1].1 - q[0].1) * u);
    let bot = (q[3].0 + (q[2].0 - q[3].0) * u, q[3].1 + (q[2].1 - q[3].1) * u);
    (top.0 + (bot.0 - top.0) * v, top.1 + (bot.1 - top.1) * v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_thousand_entities() {
        let cfg = SyntheticCityConfig::with_entity_count(5000, 1);
        let map = cfg.build().unwrap();
        assert_eq!(map.entity_count(), 5000);
        assert!(map.aois().iter().all(|a| a.pois.len() >= 3));
        assert!(map.aois().iter().all(|a| map.dominant_category(a).is_some()));
    }

    #[test]
    fn deterministic() {
        let cfg = SyntheticCityConfig::with_entity_count(300, 3);
        assert_eq!(cfg.generate(), cfg.generate());
    }
}
