//! Reference implementations used to check generated data. They share no
//! code with the library beyond its data types: geometry, routing and
//! answer derivation are written out again here from their definitions.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};

use urbanscope::eval::{EvalQuestion, Group};
use urbanscope::instruct::{InstructionSample, Role};
use urbanscope::map::{Aoi, CityMap, EntityKind};
use urbanscope::GeoPoint;

pub const R: f64 = 6_371_000.0;
pub const WORDS: [&str; 8] = ["north", "northeast", "east", "southeast", "south", "southwest", "west", "northwest"];

pub fn dist(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let h = ((p2 - p1) / 2.0).sin().powi(2) + p1.cos() * p2.cos() * ((b.lon - a.lon).to_radians() / 2.0).sin().powi(2);
    2.0 * R * h.sqrt().min(1.0).asin()
}

pub fn bearing(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dl = (b.lon - a.lon).to_radians();
    let y = dl.sin() * p2.cos();
    let x = p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos();
    y.atan2(x).to_degrees().rem_euclid(360.0)
}

/// Index into [`WORDS`] of the 45-degree sector centered on each compass point.
pub fn sector(deg: f64) -> usize {
    let s = (deg + 22.5).rem_euclid(360.0);
    ((s / 45.0).floor() as usize) % 8
}

/// Shortest path length by enumerating every simple path.
pub fn brute_force_shortest(n: usize, edges: &[(usize, usize, f64)], o: usize, d: usize) -> Option<f64> {
    fn go(v: usize, d: usize, acc: f64, seen: &mut Vec<bool>, adj: &[Vec<(usize, f64)>], best: &mut Option<f64>) {
        if v == d {
            *best = Some(best.map_or(acc, |b: f64| b.min(acc)));
            return;
        }
        for &(u, w) in &adj[v] {
            if !seen[u] {
                seen[u] = true;
                go(u, d, acc + w, seen, adj, best);
                seen[u] = false;
            }
        }
    }
    let mut adj = vec![Vec::new(); n];
    for &(a, b, w) in edges {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    let mut seen = vec![false; n];
    seen[o] = true;
    let mut best = None;
    go(o, d, 0.0, &mut seen, &adj, &mut best);
    best
}

/// One walked edge.
#[derive(Debug, Clone)]
pub struct Leg {
    pub from: usize,
    pub to: usize,
    pub length: f64,
    pub road_name: String,
}

/// Junction graph rebuilt from the map's road list.
pub struct RefGraph {
    pub ids: Vec<String>,
    pub loc: Vec<GeoPoint>,
    pub slot: HashMap<String, usize>,
    /// (neighbor, length, road id, road name)
    pub adj: Vec<Vec<(usize, f64, String, String)>>,
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64);
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Key {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

impl RefGraph {
    pub fn new(map: &CityMap) -> Self {
        let ids: Vec<String> = map.junctions().iter().map(|j| j.id.clone()).collect();
        let loc = map.junctions().iter().map(|j| j.location).collect();
        let slot: HashMap<String, usize> = ids.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        let mut adj = vec![Vec::new(); ids.len()];
        for r in map.roads() {
            let (a, b) = (slot[&r.from], slot[&r.to]);
            adj[a].push((b, r.length_m, r.id.clone(), r.name.clone()));
            adj[b].push((a, r.length_m, r.id.clone(), r.name.clone()));
        }
        Self { ids, loc, slot, adj }
    }

    /// Shortest path whose junction-id sequence is lexicographically smallest
    /// among all shortest ones: label-setting search over (length, sequence).
    pub fn route(&self, o: usize, d: usize) -> Option<Vec<Leg>> {
        if o == d {
            return Some(Vec::new());
        }
        let mut done = vec![false; self.ids.len()];
        // labels live in `arena`; the heap orders them by (length, junction-id sequence)
        let mut arena: Vec<(usize, Vec<Leg>)> = vec![(o, Vec::new())];
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((Key(0.0), vec![self.ids[o].clone()], 0usize)));
        while let Some(Reverse((Key(len), seq, label))) = heap.pop() {
            let v = arena[label].0;
            if done[v] {
                continue;
            }
            done[v] = true;
            if v == d {
                return Some(std::mem::take(&mut arena[label].1));
            }
            // parallel roads: keep the shortest, then the smallest road id
            let mut best: BTreeMap<usize, (Key, &String, &String)> = BTreeMap::new();
            for (u, w, rid, rname) in &self.adj[v] {
                let cand = (Key(*w), rid, rname);
                let e = best.entry(*u).or_insert(cand);
                if (cand.0, cand.1) < (e.0, e.1) {
                    *e = cand;
                }
            }
            for (u, (Key(w), _, rname)) in best {
                if done[u] {
                    continue;
                }
                let mut s = seq.clone();
                s.push(self.ids[u].clone());
                let mut legs = arena[label].1.clone();
                legs.push(Leg { from: v, to: u, length: w, road_name: rname.clone() });
                arena.push((u, legs));
                heap.push(Reverse((Key(len + w), s, arena.len() - 1)));
            }
        }
        None
    }

    pub fn route_ids(&self, o: &str, d: &str) -> Option<Vec<Leg>> {
        self.route(self.slot[o], self.slot[d])
    }

    pub fn total(legs: &[Leg]) -> f64 {
        legs.iter().fold(0.0, |acc, l| acc + l.length)
    }

    /// Compass word of the net displacement after grouping legs by direction.
    pub fn net_direction(&self, legs: &[Leg]) -> Option<&'static str> {
        let mut acc = [0.0f64; 8];
        for l in legs {
            acc[sector(bearing(self.loc[l.from], self.loc[l.to]))] += l.length;
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let units = [(0.0, 1.0), (h, h), (1.0, 0.0), (h, -h), (0.0, -1.0), (-h, -h), (-1.0, 0.0), (-h, h)];
        let (mut e, mut n) = (0.0, 0.0);
        for (k, (ue, un)) in units.iter().enumerate() {
            e += ue * acc[k];
            n += un * acc[k];
        }
        if e.hypot(n) < 1.0 {
            return None;
        }
        Some(WORDS[sector(e.atan2(n).to_degrees().rem_euclid(360.0))])
    }

    pub fn nearest_junction(&self, p: GeoPoint) -> usize {
        (0..self.ids.len())
            .min_by(|&a, &b| dist(p, self.loc[a]).total_cmp(&dist(p, self.loc[b])).then(self.ids[a].cmp(&self.ids[b])))
            .unwrap()
    }
}

fn round10(m: f64) -> i64 {
    ((m / 10.0).round() * 10.0) as i64
}

fn assistant_turns(s: &InstructionSample) -> Vec<&str> {
    s.messages.iter().filter(|m| m.role == Role::Assistant).map(|m| m.content.as_str()).collect()
}

fn check_route_meta(s: &InstructionSample, g: &RefGraph) -> Result<Vec<Leg>, String> {
    let route = s.meta.route.as_ref().ok_or("missing route")?;
    let (o, d) = (&s.meta.entities[0], &s.meta.entities[1]);
    let legs = g.route_ids(o, d).ok_or("unreachable")?;
    let mut seq: Vec<&str> = legs.iter().map(|l| g.ids[l.from].as_str()).collect();
    seq.push(&g.ids[legs.last().ok_or("empty route")?.to]);
    if seq != route.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(format!("{}: route {:?} is not the reference shortest path {:?}", s.id, route, seq));
    }
    Ok(legs)
}

/// Re-derive every final answer of a CityReasoning sample.
pub fn check_reasoning(s: &InstructionSample, g: &RefGraph) -> Result<(), String> {
    let legs = check_route_meta(s, g)?;
    let (o, d) = (&s.meta.entities[0], &s.meta.entities[1]);
    let distance = format!("The distance from junction {o} to junction {d} is about {} meters.", round10(RefGraph::total(&legs)));
    let word = g.net_direction(&legs).ok_or_else(|| format!("{}: net displacement below 1 m", s.id))?;
    let direction = format!("So junction {d} lies to the {word} of junction {o}.");
    let mut kinds = vec![s.meta.question_type.as_str()];
    if let Some(f) = &s.meta.followup_type {
        kinds.push(f.strip_suffix("_followup").ok_or("bad followup type")?);
    }
    let turns = assistant_turns(s);
    if turns.len() != kinds.len() {
        return Err(format!("{}: {} answers for {} questions", s.id, turns.len(), kinds.len()));
    }
    for (kind, turn) in kinds.iter().zip(turns) {
        let expected = if *kind == "distance" { &distance } else { &direction };
        let last = turn.lines().last().unwrap_or("");
        if last != expected {
            return Err(format!("{}: final answer {last:?}, expected {expected:?}", s.id));
        }
    }
    Ok(())
}

/// A CityWalk narration follows the reference route, leg by leg.
pub fn check_citywalk(s: &InstructionSample, g: &RefGraph) -> Result<(), String> {
    let legs = check_route_meta(s, g)?;
    let text = assistant_turns(s).join("\n");
    for (k, l) in legs.iter().enumerate() {
        let word = WORDS[sector(bearing(g.loc[l.from], g.loc[l.to]))];
        let line = format!("Step {}: walk {word} along {} for {:.0} m to junction {}.", k + 1, l.road_name, l.length, g.ids[l.to]);
        if !text.contains(&line) {
            return Err(format!("{}: missing {line:?}", s.id));
        }
    }
    let end = format!("You have arrived after {:.0} m in total.", RefGraph::total(&legs));
    if !text.ends_with(&end) {
        return Err(format!("{}: narration does not end with {end:?}", s.id));
    }
    Ok(())
}

/// Facts a CityQA answer has to state about its entity.
pub fn check_cityqa(s: &InstructionSample, map: &CityMap) -> Result<(), String> {
    let id = s.meta.entities.first().ok_or("no entity")?;
    let answer = assistant_turns(s).join("\n");
    let must: Vec<String> = match s.meta.question_type.as_str() {
        "poi_category" => {
            let p = map.poi(id).ok_or("unknown poi")?;
            vec![p.name.clone(), format!("is a {} place", p.category)]
        }
        "poi_address" => {
            let p = map.poi(id).ok_or("unknown poi")?;
            let a = p.address.as_ref().ok_or("poi without address")?;
            vec![p.name.clone(), a.road_name.clone()]
        }
        "poi_coordinates" => {
            let p = map.poi(id).ok_or("unknown poi")?;
            vec![format!("longitude {:.6}, latitude {:.6}", p.location.lon, p.location.lat)]
        }
        "aoi_location" => {
            let a = map.aoi(id).ok_or("unknown aoi")?;
            vec![format!("longitude {:.6}, latitude {:.6}", a.centroid.lon, a.centroid.lat)]
        }
        "poi_nearby" | "aoi_nearby" => {
            let center = map.location_of(if s.meta.question_type == "poi_nearby" { EntityKind::Poi } else { EntityKind::Aoi }, id).ok_or("unknown entity")?;
            return check_nearby_list(&answer, center, id, map);
        }
        "road_relations" => {
            let mut v: Vec<String> = endpoints(map, id).iter().map(|j| format!("junction {j}")).collect();
            v.extend(connected(map, id));
            v
        }
        "junction_relations" => {
            let j = map.junction(id).ok_or("unknown junction")?;
            let names: BTreeSet<String> = j.incident_roads.iter().filter_map(|r| map.road(r)).map(|r| r.name.clone()).collect();
            vec![format!("Junction {id} is where {} meet.", names.into_iter().collect::<Vec<_>>().join(", "))]
        }
        other => return Err(format!("unknown question type {other}")),
    };
    for m in must {
        if !answer.contains(&m) {
            return Err(format!("{}: answer {answer:?} lacks {m:?}", s.id));
        }
    }
    Ok(())
}

fn endpoints(map: &CityMap, name: &str) -> Vec<String> {
    let mut deg: BTreeMap<&str, usize> = BTreeMap::new();
    for r in map.roads().iter().filter(|r| r.name == name) {
        *deg.entry(&r.from).or_default() += 1;
        *deg.entry(&r.to).or_default() += 1;
    }
    deg.into_iter().filter(|(_, d)| *d == 1).map(|(j, _)| j.to_string()).collect()
}

fn connected(map: &CityMap, name: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for r in map.roads().iter().filter(|r| r.name == name) {
        for j in [&r.from, &r.to] {
            for other in map.roads().iter().filter(|x| (&x.from == j || &x.to == j) && x.name != name) {
                out.insert(other.name.clone());
            }
        }
    }
    out
}

/// "Near X you can find: A (12 m), B (30 m)." lists true neighbours within 500 m, closest first.
fn check_nearby_list(answer: &str, center: GeoPoint, self_id: &str, map: &CityMap) -> Result<(), String> {
    let mut all: Vec<(f64, String)> = Vec::new();
    for p in map.pois() {
        all.push((dist(center, p.location), p.name.clone()));
    }
    for a in map.aois() {
        all.push((dist(center, a.centroid), a.name.clone()));
    }
    for j in map.junctions() {
        all.push((dist(center, j.location), format!("junction {}", j.id)));
    }
    let self_label = map.poi(self_id).map(|p| p.name.clone()).or_else(|| map.aoi(self_id).map(|a| a.name.clone()));
    let within: Vec<&(f64, String)> = all.iter().filter(|(d, n)| *d <= 500.0 && Some(n) != self_label.as_ref()).collect();
    let Some(list) = answer.split("you can find: ").nth(1) else {
        return if within.is_empty() || answer.contains("nothing else within 500 m") {
            Ok(())
        } else {
            Err(format!("answer {answer:?} lists nothing but {} entities are within 500 m", within.len()))
        };
    };
    let mut prev = 0.0;
    for item in list.trim_end_matches('.').split(", ") {
        let (name, rest) = item.rsplit_once(" (").ok_or("bad list item")?;
        let d: f64 = rest.trim_end_matches(" m)").parse().map_err(|_| format!("bad distance in {item:?}"))?;
        if d + 0.5 < prev {
            return Err(format!("list not sorted by distance: {answer:?}"));
        }
        prev = d;
        if !all.iter().any(|(td, n)| n == name && (td - d).abs() <= 0.5 && *td <= 500.0 + 0.5) {
            return Err(format!("{name:?} is not {d} m away"));
        }
    }
    Ok(())
}

// --- benchmark answer keys -------------------------------------------------

/// Equirectangular projection around `o`, meters.
pub fn xy(o: GeoPoint, p: GeoPoint) -> (f64, f64) {
    let k = std::f64::consts::PI / 180.0 * R;
    ((p.lon - o.lon) * k * o.lat.to_radians().cos(), (p.lat - o.lat) * k)
}

pub fn inside(aoi: &Aoi, p: GeoPoint) -> bool {
    let ring: Vec<(f64, f64)> = aoi.boundary.iter().map(|q| xy(aoi.centroid, *q)).collect();
    let (x, y) = xy(aoi.centroid, p);
    let mut c = false;
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + n - 1) % n]);
        if (a.1 > y) != (b.1 > y) && x < (b.0 - a.0) * (y - a.1) / (b.1 - a.1) + a.0 {
            c = !c;
        }
    }
    c
}

fn seg_dist(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let l2 = dx * dx + dy * dy;
    let t = if l2 == 0.0 { 0.0 } else { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / l2).clamp(0.0, 1.0) };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

fn category_counts(map: &CityMap, a: &Aoi) -> BTreeMap<String, usize> {
    let mut c = BTreeMap::new();
    for id in &a.pois {
        *c.entry(map.poi(id).unwrap().category.clone()).or_default() += 1;
    }
    c
}

fn strict_dominant(map: &CityMap, a: &Aoi) -> Option<String> {
    let c = category_counts(map, a);
    let max = *c.values().max()?;
    let top: Vec<&String> = c.iter().filter(|(_, v)| **v == max).map(|(k, _)| k).collect();
    (top.len() == 1).then(|| top[0].clone())
}

fn function_of(map: &CityMap, a: &Aoi) -> Option<String> {
    strict_dominant(map, a).and_then(|c| map.taxonomy().function_of(&c).map(str::to_string))
}

fn length_label(m: f64) -> &'static str {
    match m {
        m if m < 300.0 => "under 300 m",
        m if m < 600.0 => "300 m to 600 m",
        m if m < 1200.0 => "600 m to 1.2 km",
        m if m < 2500.0 => "1.2 km to 2.5 km",
        m if m < 5000.0 => "2.5 km to 5 km",
        _ => "over 5 km",
    }
}

fn bucket(m: f64) -> String {
    let mut lo = 100.0f64;
    while lo > m {
        lo /= 2.0;
    }
    while lo * 2.0 <= m {
        lo *= 2.0;
    }
    let f = |x: f64| if x.fract() == 0.0 { format!("{x:.0}") } else { format!("{x}") };
    format!("between {} m and {} m", f(lo), f(lo * 2.0))
}

fn aoi<'a>(map: &'a CityMap, id: &str) -> Result<&'a Aoi, String> {
    map.aoi(id).ok_or_else(|| format!("unknown AoI {id}"))
}

fn nearest_landmarks(map: &CityMap, at: GeoPoint, cats: &[String]) -> Vec<String> {
    let marks: Vec<(f64, &str)> =
        map.pois().iter().filter(|p| cats.contains(&p.category)).map(|p| (dist(at, p.location), p.id.as_str())).collect();
    let best = marks.iter().map(|m| m.0).fold(f64::INFINITY, f64::min);
    marks.iter().filter(|m| m.0 - best < 1e-6).map(|m| m.1.to_string()).collect()
}

/// Indices of every option that is a correct answer, derived from the
/// question's grounding and the map alone.
pub fn correct_options(q: &EvalQuestion, map: &CityMap, g: &RefGraph, landmark_cats: &[String]) -> Result<Vec<usize>, String> {
    let m = &q.meta;
    let opts = |pred: &dyn Fn(usize) -> bool| (0..q.choices.len()).filter(|&i| pred(i)).collect::<Vec<_>>();
    let by_label = |truth: &str| opts(&|i| q.choices[i] == truth);
    let id0 = || m.ids.first().cloned().ok_or_else(|| "no subject id".to_string());
    Ok(match (q.group, q.task.as_str()) {
        (Group::CityImage, "road_endpoints") => {
            let e = endpoints(map, &id0()?);
            by_label(&format!("junction {} and junction {}", e[0], e[1]))
        }
        (Group::CityImage, "road_length_class") => {
            let name = id0()?;
            let total: f64 = map.roads().iter().filter(|r| r.name == name).map(|r| r.length_m).sum();
            by_label(length_label(total))
        }
        (Group::CityImage, "road_connecting_districts") => {
            let (a, b) = (aoi(map, &m.ids[0])?, aoi(map, &m.ids[1])?);
            let (ba, bb) = (map.bordering_roads(a, 50.0), map.bordering_roads(b, 50.0));
            opts(&|i| ba.contains(&m.option_ids[i]) && bb.contains(&m.option_ids[i]))
        }
        (Group::CityImage, "region_boundary") => by_label(&map.bordering_roads(aoi(map, &id0()?)?, 50.0).join(", ")),
        (Group::CityImage, "road_side_poi") => {
            let seg = map.road(&id0()?).ok_or("unknown segment")?;
            opts(&|i| {
                let Some(p) = map.poi(&m.option_ids[i]) else { return false };
                if p.address.as_ref().is_none_or(|a| a.segment_id != seg.id) {
                    return false;
                }
                let o = seg.polyline[0];
                let pts: Vec<(f64, f64)> = seg.polyline.iter().map(|x| xy(o, *x)).collect();
                let pp = xy(o, p.location);
                let k = (0..pts.len() - 1)
                    .min_by(|&a, &b| seg_dist(pp, pts[a], pts[a + 1]).total_cmp(&seg_dist(pp, pts[b], pts[b + 1])))
                    .unwrap();
                let (a, b) = (pts[k], pts[k + 1]);
                (b.0 - a.0) * (pp.1 - a.1) - (b.1 - a.1) * (pp.0 - a.0) > 0.0
            })
        }
        (Group::CityImage, "poi_district" | "landmark_district") => {
            let p = map.poi(&id0()?).ok_or("unknown poi")?;
            let homes: Vec<&str> = map.aois().iter().filter(|a| inside(a, p.location)).map(|a| a.id.as_str()).collect();
            if homes.len() != 1 {
                return Err(format!("{}: PoI lies in {} AoIs", q.id, homes.len()));
            }
            opts(&|i| m.option_ids[i] == homes[0])
        }
        (Group::CityImage, "adjacent_districts") => {
            let a = aoi(map, &id0()?)?;
            opts(&|i| map.aoi(&m.option_ids[i]).is_some_and(|b| b.id != a.id && map.aoi_gap(a, b) <= 60.0))
        }
        (Group::CityImage, "junction_roads") => {
            let j = map.junction(&id0()?).ok_or("unknown junction")?;
            let names: BTreeSet<String> = j.incident_roads.iter().filter_map(|r| map.road(r)).map(|r| r.name.clone()).collect();
            by_label(&names.into_iter().collect::<Vec<_>>().join(", "))
        }
        (Group::CityImage, "junction_nearest_landmark") => {
            let j = map.junction(&id0()?).ok_or("unknown junction")?;
            let best = nearest_landmarks(map, j.location, landmark_cats);
            opts(&|i| best.contains(&m.option_ids[i]))
        }
        (Group::CityImage, "nearest_landmark_to_point") => {
            let best = nearest_landmarks(map, m.point.ok_or("no point")?, landmark_cats);
            opts(&|i| best.contains(&m.option_ids[i]))
        }
        (Group::CityImage, "landmark_nearest_road") => {
            let p = map.poi(&id0()?).ok_or("unknown poi")?;
            let d: Vec<(f64, &str)> = map
                .roads()
                .iter()
                .map(|r| {
                    let pts: Vec<(f64, f64)> = r.polyline.iter().map(|x| xy(p.location, *x)).collect();
                    let best = pts.windows(2).map(|w| seg_dist((0.0, 0.0), w[0], w[1])).fold(f64::INFINITY, f64::min);
                    (best, r.name.as_str())
                })
                .collect();
            let min = d.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
            let names: BTreeSet<&str> = d.iter().filter(|x| x.0 - min < 1e-6).map(|x| x.1).collect();
            opts(&|i| names.contains(m.option_ids[i].as_str()))
        }
        (Group::UrbanSemantics, "function_from_poi_list" | "function_from_histogram") => {
            by_label(&function_of(map, aoi(map, &id0()?)?).ok_or("area without a function")?)
        }
        (Group::UrbanSemantics, "missing_category") => {
            let present = category_counts(map, aoi(map, &id0()?)?);
            let removed = m.param.clone().ok_or("no removed category")?;
            // listed categories are in the stem, so only the removed one counts
            opts(&|i| present.contains_key(&q.choices[i]) && (q.choices[i] == removed || !q.question.contains(&q.choices[i])))
        }
        (Group::UrbanSemantics, "dominant_category") => {
            by_label(&strict_dominant(map, aoi(map, &id0()?)?).ok_or("no strict majority")?)
        }
        (Group::UrbanSemantics, "region_with_function") => {
            let f = m.param.clone().ok_or("no function")?;
            opts(&|i| map.aoi(&m.option_ids[i]).and_then(|a| function_of(map, a)).as_deref() == Some(f.as_str()))
        }
        (Group::UrbanSemantics, "out_of_place_poi") => {
            let a = aoi(map, &id0()?)?;
            opts(&|i| !a.pois.contains(&m.option_ids[i]) && map.poi(&m.option_ids[i]).is_some_and(|p| !inside(a, p.location)))
        }
        (Group::SpatialReasoning, task) => {
            let stops: Vec<usize> = m.stops.iter().map(|s| g.slot[s]).collect();
            if task.contains("point_to_point") || task.contains("relative_three") {
                for (pid, &s) in m.ids.iter().zip(&stops) {
                    if g.nearest_junction(map.poi(pid).ok_or("unknown poi")?.location) != s {
                        return Err(format!("{}: stop is not the PoI's nearest junction", q.id));
                    }
                }
            }
            if task.contains("nearest_candidate") {
                let a = g.nearest_junction(map.poi(&m.ids[0]).ok_or("unknown poi")?.location);
                let cands: Vec<(f64, usize)> = m.ids[1..]
                    .iter()
                    .map(|pid| {
                        let j = g.nearest_junction(map.poi(pid).unwrap().location);
                        (RefGraph::total(&g.route(a, j).unwrap()), j)
                    })
                    .collect();
                let best = cands.iter().min_by(|x, y| x.0.total_cmp(&y.0)).unwrap();
                if a != stops[0] || best.1 != stops[1] {
                    return Err(format!("{}: stops do not lead to the nearest candidate", q.id));
                }
            }
            let mut legs = Vec::new();
            for w in stops.windows(2) {
                legs.extend(g.route(w[0], w[1]).ok_or("unreachable stop")?);
            }
            if task.starts_with("distance") {
                by_label(&bucket(RefGraph::total(&legs)))
            } else {
                by_label(g.net_direction(&legs).ok_or("no net direction")?)
            }
        }
        (_, task) => return Err(format!("unknown task {task}")),
    })
}

/// Pearson chi-square statistic of counts against a uniform expectation.
pub fn chi_square_uniform(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}
