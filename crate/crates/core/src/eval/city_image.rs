use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::BenchError;
use crate::geo::{haversine, GeoPoint};
use crate::instruct::apportion_counts;
use crate::map::{reconstruct_address, Aoi, CityMap, EntityKind, Poi, Side};
use crate::routing::RoadGraph;

use super::{assemble, build_task, make_choices, make_entity_choices, BenchmarkSpec, Draft, EvalQuestion, Group, QuestionMeta};

pub const CITY_IMAGE_TYPES: [&str; 12] = [
    "road_endpoints",
    "road_length_class",
    "road_connecting_districts",
    "region_boundary",
    "road_side_poi",
    "poi_district",
    "adjacent_districts",
    "junction_roads",
    "junction_nearest_landmark",
    "nearest_landmark_to_point",
    "landmark_district",
    "landmark_nearest_road",
];

/// Upper bounds (exclusive) in meters with their labels; the last class is open.
pub const LENGTH_CLASSES: [(f64, &str); 6] = [
    (300.0, "under 300 m"),
    (600.0, "300 m to 600 m"),
    (1200.0, "600 m to 1.2 km"),
    (2500.0, "1.2 km to 2.5 km"),
    (5000.0, "2.5 km to 5 km"),
    (f64::INFINITY, "over 5 km"),
];

pub fn length_class(meters: f64) -> usize {
    LENGTH_CLASSES.iter().position(|(hi, _)| meters < *hi).unwrap_or(LENGTH_CLASSES.len() - 1)
}

pub(crate) fn junction_pair_label(a: &str, b: &str) -> String {
    let (x, y) = if a <= b { (a, b) } else { (b, a) };
    format!("junction {x} and junction {y}")
}

struct Ctx<'a> {
    map: &'a CityMap,
    spec: &'a BenchmarkSpec,
    road_names: Vec<String>,
    two_ended: Vec<(String, String, String)>,
    bordering: Vec<Vec<String>>,
    landmarks: Vec<&'a Poi>,
}

impl<'a> Ctx<'a> {
    fn new(map: &'a CityMap, spec: &'a BenchmarkSpec, needs_borders: bool) -> Self {
        let road_names = map.road_names();
        let two_ended = road_names
            .iter()
            .filter_map(|n| match map.road_endpoints(n).as_slice() {
                [a, b] => Some((n.clone(), a.clone(), b.clone())),
                _ => None,
            })
            .collect();
        let bordering = if needs_borders {
            map.aois().iter().map(|a| map.bordering_roads(a, spec.border_gap_m)).collect()
        } else {
            Vec::new()
        };
        let landmarks = map.pois().iter().filter(|p| spec.landmark_categories.contains(&p.category)).collect();
        Self { map, spec, road_names, two_ended, bordering, landmarks }
    }

    fn n(&self) -> usize {
        self.spec.choices
    }

    fn aoi_idx(&self, rng: &mut ChaCha8Rng) -> Option<usize> {
        (!self.map.aois().is_empty()).then(|| rng.random_range(0..self.map.aois().len()))
    }

    /// AoIs other than `exclude` ordered nearest first, limited to the distractor radius
    /// (falling back to every AoI when that leaves too few).
    fn aois_near(&self, center: GeoPoint, keep: impl Fn(&Aoi) -> bool) -> Vec<(String, String)> {
        let mut near: Vec<(f64, &Aoi)> =
            self.map.aois().iter().filter(|a| keep(a)).map(|a| (haversine(center, a.centroid), a)).collect();
        near.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.id.cmp(&y.1.id)));
        let within = near.iter().filter(|(d, _)| *d <= self.spec.distractor_radius_m).count();
        let take = if within >= self.n() - 1 { within } else { near.len() };
        near.into_iter().take(take).map(|(_, a)| (a.id.clone(), a.name.clone())).collect()
    }

    fn nearest_landmark(&self, at: GeoPoint) -> Option<(&'a Poi, f64)> {
        self.landmarks
            .iter()
            .map(|p| (*p, haversine(at, p.location)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.id.cmp(&b.0.id)))
    }

    fn landmarks_near(&self, at: GeoPoint, except: &str) -> Vec<(String, String)> {
        let mut near: Vec<(f64, &Poi)> =
            self.landmarks.iter().filter(|p| p.id != except).map(|p| (haversine(at, p.location), *p)).collect();
        near.sort_by(|x, y| x.0.total_cmp(&y.0).then_with(|| x.1.id.cmp(&y.1.id)));
        near.into_iter().take(24).map(|(_, p)| (p.id.clone(), p.name.clone())).collect()
    }

    fn draft(&self, question: String, choices: Vec<String>, answer: usize, meta: QuestionMeta) -> Draft {
        Draft { question, choices, answer, with_context: false, meta }
    }

    fn make(&self, task: &str, rng: &mut ChaCha8Rng) -> Option<Draft> {
        let map = self.map;
        match task {
            "road_endpoints" => {
                let (name, a, b) = self.two_ended.choose(rng)?;
                let correct = junction_pair_label(a, b);
                let mut pool: Vec<String> = self
                    .two_ended
                    .iter()
                    .filter(|(n, _, _)| n != name)
                    .map(|(_, x, y)| junction_pair_label(x, y))
                    .collect();
                if pool.len() < self.n() - 1 {
                    for j in map.junctions().iter().take(64) {
                        if j.id != *a && j.id != *b {
                            pool.push(junction_pair_label(a, &j.id));
                        }
                    }
                }
                let (choices, answer) = make_choices(&correct, &pool, self.n(), rng).ok()?;
                let q = format!("Which two junctions are the origin and destination of {name}?");
                Some(self.draft(q, choices, answer, QuestionMeta { ids: vec![name.clone()], ..Default::default() }))
            }
            "road_length_class" => {
                let name = self.road_names.choose(rng)?;
                let class = length_class(map.road_length(name));
                let pool: Vec<String> = LENGTH_CLASSES.iter().map(|(_, l)| l.to_string()).collect();
                let n = self.n().min(LENGTH_CLASSES.len());
                let (choices, answer) = make_choices(LENGTH_CLASSES[class].1, &pool, n, rng).ok()?;
                let q = format!("How long is {name} in total?");
                Some(self.draft(q, choices, answer, QuestionMeta { ids: vec![name.clone()], ..Default::default() }))
            }
            "road_connecting_districts" => {
                let i = self.aoi_idx(rng)?;
                let a = &map.aois()[i];
                let partners: Vec<usize> = (0..map.aois().len())
                    .filter(|&j| {
                        j != i
                            && haversine(a.centroid, map.aois()[j].centroid) <= self.spec.distractor_radius_m
                            && self.bordering[j].iter().any(|r| self.bordering[i].contains(r))
                    })
                    .collect();
                let j = *partners.choose(rng)?;
                let b = &map.aois()[j];
                let shared: Vec<&String> = self.bordering[i].iter().filter(|r| self.bordering[j].contains(r)).collect();
                let correct = (*shared.choose(rng)?).clone();
                let mut pool: Vec<String> = self.bordering[i]
                    .iter()
                    .chain(&self.bordering[j])
                    .filter(|r| !shared.contains(r))
                    .cloned()
                    .collect();
                if pool.len() < self.n() - 1 {
                    pool.extend(self.road_names.iter().filter(|r| !shared.contains(r)).cloned());
                }
                let (choices, answer) = make_choices(&correct, &pool, self.n(), rng).ok()?;
                let q = format!("Which road runs along both {} and {}?", a.name, b.name);
                let meta = QuestionMeta { ids: vec![a.id.clone(), b.id.clone()], option_ids: choices.clone(), ..Default::default() };
                Some(self.draft(q, choices, answer, meta))
            }
            "region_boundary" => {
                let i = self.aoi_idx(rng)?;
                if self.bordering[i].is_empty() {
                    return None;
                }
                let a = &map.aois()[i];
                let correct = self.bordering[i].join(", ");
                let pool: Vec<String> = self
                    .aois_near(a.centroid, |x| x.id != a.id)
                    .iter()
                    .filter_map(|(id, _)| {
                        let j = map.aois().binary_search_by(|x| x.id.as_str().cmp(id)).ok()?;
                        (!self.bordering[j].is_empty()).then(|| self.bordering[j].join(", "))
                    })
                    .collect();
                let (choices, answer) = make_choices(&correct, &pool, self.n(), rng).ok()?;
                let q = format!("Which roads serve as the boundaries of {}?", a.name);
                Some(self.draft(q, choices, answer, QuestionMeta { ids: vec![a.id.clone()], ..Default::default() }))
            }
            "road_side_poi" => {
                let seg = map.roads().choose(rng)?;
                let mut left = Vec::new();
                let mut other = Vec::new();
                for p in map.nearby_entities(seg.polyline[seg.polyline.len() / 2], self.spec.distractor_radius_m / 4.0, &[EntityKind::Poi]) {
                    let poi = map.poi(&p.id)?;
                    let on_left = poi.address.as_ref().is_some_and(|a| a.segment_id == seg.id && a.side_heading_forward(map) == Some(Side::Left));
                    if on_left {
                        left.push(poi);
                    } else {
                        other.push((poi.id.clone(), poi.name.clone()));
                    }
                }
                let target = *left.choose(rng)?;
                // names shared with another left-side PoI would make two options correct
                let left_names: Vec<&str> = left.iter().map(|p| p.name.as_str()).collect();
                other.retain(|(_, n)| !left_names.contains(&n.as_str()));
                let (choices, option_ids, answer) =
                    make_entity_choices((&target.id, &target.name), &other, self.n(), rng).ok()?;
                let q = format!(
                    "Walking along {} from junction {} to junction {}, which of these places is on your left?",
                    seg.name, seg.from, seg.to
                );
                let meta = QuestionMeta { ids: vec![seg.id.clone()], option_ids, ..Default::default() };
                Some(self.draft(q, choices, answer, meta))
            }
            "poi_district" | "landmark_district" => {
                let p = if task == "poi_district" { map.pois().choose(rng)? } else { *self.landmarks.choose(rng)? };
                let containing = map.aois_containing(p.location);
                let [home] = containing.as_slice() else { return None };
                let pool = self.aois_near(p.location, |a| a.id != home.id && a.name != home.name);
                let (choices, option_ids, answer) =
                    make_entity_choices((&home.id, &home.name), &pool, self.n(), rng).ok()?;
                let q = if task == "poi_district" {
                    format!("Which district is {} located in?", p.name)
                } else {
                    format!("The landmark {} lies in which district?", p.name)
                };
                let meta = QuestionMeta { ids: vec![p.id.clone()], option_ids, ..Default::default() };
                Some(self.draft(q, choices, answer, meta))
            }
            "adjacent_districts" => {
                let a = map.aois().choose(rng)?;
                let mut adjacent = Vec::new();
                let mut apart = Vec::new();
                for b in map.aois() {
                    if b.id == a.id || haversine(a.centroid, b.centroid) > self.spec.distractor_radius_m {
                        continue;
                    }
                    if map.aoi_gap(a, b) <= self.spec.adjacent_gap_m {
                        adjacent.push(b);
                    } else {
                        apart.push((b.id.clone(), b.name.clone()));
                    }
                }
                let target = *adjacent.choose(rng)?;
                let names: Vec<&str> = adjacent.iter().map(|b| b.name.as_str()).collect();
                apart.retain(|(_, n)| !names.contains(&n.as_str()) && *n != a.name);
                let (choices, option_ids, answer) =
                    make_entity_choices((&target.id, &target.name), &apart, self.n(), rng).ok()?;
                let q = format!("Which of these districts borders directly on {}?", a.name);
                let meta = QuestionMeta { ids: vec![a.id.clone()], option_ids, ..Default::default() };
                Some(self.draft(q, choices, answer, meta))
            }
            "junction_roads" => {
                let j = map.junctions().choose(rng)?;
                let correct = map.junction_road_names(&j.id).join(", ");
                let pool: Vec<String> = map
                    .nearby_entities(j.location, self.spec.distractor_radius_m, &[EntityKind::Junction])
                    .iter()
                    .chain(map.nearest_of_kinds(j.location, 16, &[EntityKind::Junction]).iter())
                    .map(|e| map.junction_road_names(&e.id).join(", "))
                    .collect();
                let (choices, answer) = make_choices(&correct, &pool, self.n(), rng).ok()?;
                let q = format!("Which roads meet at junction {}?", j.id);
                Some(self.draft(q, choices, answer, QuestionMeta { ids: vec![j.id.clone()], ..Default::default() }))
            }
            "junction_nearest_landmark" | "nearest_landmark_to_point" => {
                let (at, ids, point, q) = if task == "junction_nearest_landmark" {
                    let j = map.junctions().choose(rng)?;
                    (j.location, vec![j.id.clone()], None, format!("Which landmark is closest to junction {}?", j.id))
                } else {
                    let bb = map.bounding_box()?;
                    let lon = round6(rng.random_range(bb.min.lon..=bb.max.lon));
                    let lat = round6(rng.random_range(bb.min.lat..=bb.max.lat));
                    let p = GeoPoint::new(lon, lat).ok()?;
                    (p, Vec::new(), Some(p), format!("Which landmark is closest to the point at longitude {lon:.6}, latitude {lat:.6}?"))
                };
                let (best, _) = self.nearest_landmark(at)?;
                let pool: Vec<(String, String)> =
                    self.landmarks_near(at, &best.id).into_iter().filter(|(_, n)| *n != best.name).collect();
                let (choices, option_ids, answer) = make_entity_choices((&best.id, &best.name), &pool, self.n(), rng).ok()?;
                Some(self.draft(q, choices, answer, QuestionMeta { ids, option_ids, point, ..Default::default() }))
            }
            "landmark_nearest_road" => {
                let p = *self.landmarks.choose(rng)?;
                let correct = reconstruct_address(p.location, map).ok()?.road_name;
                let mut pool: Vec<String> = map
                    .nearest_of_kinds(p.location, 8, &[EntityKind::Junction])
                    .iter()
                    .flat_map(|e| map.junction_road_names(&e.id))
                    .collect();
                if pool.iter().filter(|r| **r != correct).count() < self.n() - 1 {
                    pool.extend(self.road_names.iter().cloned());
                }
                let (choices, answer) = make_choices(&correct, &pool, self.n(), rng).ok()?;
                let q = format!("Which road is closest to the landmark {}?", p.name);
                let meta = QuestionMeta { ids: vec![p.id.clone()], option_ids: choices.clone(), ..Default::default() };
                Some(self.draft(q, choices, answer, meta))
            }
            _ => None,
        }
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub fn gen_city_image(map: &CityMap, _graph: &RoadGraph, spec: &BenchmarkSpec) -> Result<Vec<EvalQuestion>, BenchError> {
    spec.validate()?;
    let needs_borders = spec.city_image_types.iter().any(|t| t == "road_connecting_districts" || t == "region_boundary");
    let ctx = Ctx::new(map, spec, needs_borders);
    let counts = apportion_counts(spec.city_image_count, spec.city_image_types.len());
    let mut per_task = Vec::new();
    for (task, &count) in spec.city_image_types.iter().zip(&counts) {
        let drafts = build_task(Group::CityImage, task, count, spec.seed, |rng| ctx.make(task, rng))?;
        per_task.push((task.clone(), drafts));
    }
    Ok(assemble(Group::CityImage, per_task))
}
