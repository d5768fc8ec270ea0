use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::BenchError;
use crate::geo::{planar_bearing, Direction};
use crate::instruct::{apportion_counts, net_displacement, render_route_context, InstructionSample, LeakKey, MIN_NET_DISPLACEMENT_M};
use crate::map::{CityMap, Poi};
use crate::routing::{RoadGraph, Route, RouteStep};
use crate::seed::rng_for;

use super::{assemble, make_choices, BenchmarkSpec, Draft, EvalQuestion, Group, QuestionMeta, ATTEMPTS};

pub const SR_VARIANTS: [&str; 5] = ["point_to_point", "along_route", "relative_three", "nearest_candidate", "multi_leg"];

/// `{distance|direction}_{variant}_{ctx|noctx}` for every combination.
pub fn spatial_task_types() -> Vec<String> {
    let mut out = Vec::with_capacity(20);
    for kind in ["distance", "direction"] {
        for v in SR_VARIANTS {
            for c in ["ctx", "noctx"] {
                out.push(format!("{kind}_{v}_{c}"));
            }
        }
    }
    out
}

/// Bucket `j` covers `[100 * 2^j, 100 * 2^(j+1))` meters.
pub fn distance_bucket(meters: f64) -> i32 {
    let anchor = |j: i32| 100.0 * 2f64.powi(j);
    let mut j = (meters / 100.0).log2().floor() as i32;
    while anchor(j + 1) <= meters {
        j += 1;
    }
    while anchor(j) > meters {
        j -= 1;
    }
    j
}

pub fn bucket_label(j: i32) -> String {
    let fmt = |x: f64| if x.fract() == 0.0 { format!("{x:.0}") } else { format!("{x}") };
    let lo = 100.0 * 2f64.powi(j);
    format!("between {} m and {} m", fmt(lo), fmt(2.0 * lo))
}

/// Compass direction of the net displacement obtained by grouping legs by
/// their direction; `None` when the legs nearly cancel out.
pub fn route_direction(steps: &[RouteStep]) -> Option<Direction> {
    let mut acc = [0.0; 8];
    for s in steps {
        acc[s.direction.index()] += s.length_m;
    }
    let (e, n) = net_displacement(&acc);
    if e.hypot(n) < MIN_NET_DISPLACEMENT_M {
        return None;
    }
    planar_bearing(e, n).map(Direction::quantize)
}

struct Ctx<'a> {
    map: &'a CityMap,
    graph: &'a RoadGraph,
    spec: &'a BenchmarkSpec,
    /// Graph node nearest to each PoI, aligned with `map.pois()`.
    poi_node: Vec<usize>,
}

struct Built {
    ids: Vec<String>,
    stops: Vec<usize>,
    route: Route,
    stem_subject: String,
    /// What the direction question asks about.
    target: String,
    context: String,
}

impl<'a> Ctx<'a> {
    fn in_window(&self, d: f64) -> bool {
        d >= self.spec.min_route_m && d <= self.spec.max_route_m
    }

    fn poi_label(&self, p: &Poi) -> String {
        p.name.clone()
    }

    fn junction(&self, node: usize) -> String {
        format!("junction {}", self.graph.node_id(node))
    }

    fn route(&self, a: usize, b: usize) -> Option<Route> {
        self.graph.shortest_path_nodes(a, b).ok()
    }

    /// A PoI whose anchor junction lies within the route window from `from`.
    fn poi_within_window(&self, rng: &mut ChaCha8Rng, from: usize) -> Option<usize> {
        let dist = self.graph.distances_from(from);
        let ok: Vec<usize> = (0..self.poi_node.len()).filter(|&i| self.in_window(dist[self.poi_node[i]])).collect();
        ok.choose(rng).copied()
    }

    fn node_within_window(&self, rng: &mut ChaCha8Rng, from: usize) -> Option<usize> {
        let dist = self.graph.distances_from(from);
        let ok: Vec<usize> = (0..self.graph.node_count()).filter(|&n| n != from && self.in_window(dist[n])).collect();
        ok.choose(rng).copied()
    }

    fn build(&self, variant: &str, rng: &mut ChaCha8Rng) -> Option<Built> {
        let pois = self.map.pois();
        match variant {
            "point_to_point" => {
                let a = rng.random_range(0..pois.len());
                let b = self.poi_within_window(rng, self.poi_node[a])?;
                let (ja, jb) = (self.poi_node[a], self.poi_node[b]);
                let route = self.route(ja, jb)?;
                let (pa, pb) = (&pois[a], &pois[b]);
                Some(Built {
                    ids: vec![pa.id.clone(), pb.id.clone()],
                    stops: vec![ja, jb],
                    context: format!(
                        "Starting at {} next to {}, this route leads to {} next to {}:\n{}",
                        self.junction(ja),
                        pa.name,
                        self.junction(jb),
                        pb.name,
                        render_route_context(&route)
                    ),
                    stem_subject: format!("from {} to {}", self.poi_label(pa), self.poi_label(pb)),
                    target: format!("{} lie from {}", pb.name, pa.name),
                    route,
                })
            }
            "along_route" => {
                let o = rng.random_range(0..self.graph.node_count());
                let d = self.node_within_window(rng, o)?;
                let route = self.route(o, d)?;
                Some(Built {
                    ids: Vec::new(),
                    stops: vec![o, d],
                    context: format!("A walking route from {} to {}:\n{}", self.junction(o), self.junction(d), render_route_context(&route)),
                    stem_subject: format!("from {} to {} along the shortest walking route", self.junction(o), self.junction(d)),
                    target: format!("{} lie from {}", self.junction(d), self.junction(o)),
                    route,
                })
            }
            "relative_three" => {
                let a = rng.random_range(0..pois.len());
                let b = self.poi_within_window(rng, self.poi_node[a])?;
                let c = self.poi_within_window(rng, self.poi_node[b])?;
                let (ja, jb, jc) = (self.poi_node[a], self.poi_node[b], self.poi_node[c]);
                if ja == jc {
                    return None;
                }
                let (r1, r2) = (self.route(ja, jb)?, self.route(jb, jc)?);
                let (pa, pb, pc) = (&pois[a], &pois[b], &pois[c]);
                let context = format!(
                    "From {} ({}) to {} ({}):\n{}\nFrom {} ({}) to {} ({}):\n{}",
                    pa.name,
                    self.junction(ja),
                    pb.name,
                    self.junction(jb),
                    render_route_context(&r1),
                    pb.name,
                    self.junction(jb),
                    pc.name,
                    self.junction(jc),
                    render_route_context(&r2)
                );
                Some(Built {
                    ids: vec![pa.id.clone(), pb.id.clone(), pc.id.clone()],
                    stops: vec![ja, jb, jc],
                    stem_subject: format!("from {} by way of {} to {}", pa.name, pb.name, pc.name),
                    target: format!("{} lie from {}", pc.name, pa.name),
                    context,
                    route: r1.join(r2),
                })
            }
            "nearest_candidate" => {
                let a = rng.random_range(0..pois.len());
                let ja = self.poi_node[a];
                let dist = self.graph.distances_from(ja);
                let ok: Vec<usize> = (0..pois.len()).filter(|&i| self.in_window(dist[self.poi_node[i]])).collect();
                let picks: Vec<usize> = ok.choose_multiple(rng, 3).copied().collect();
                if picks.len() < 3 {
                    return None;
                }
                let mut by_dist: Vec<(f64, usize)> = picks.iter().map(|&i| (dist[self.poi_node[i]], i)).collect();
                by_dist.sort_by(|x, y| x.0.total_cmp(&y.0));
                // the nearest must win clearly so the answer is not a rounding artefact
                if by_dist[1].0 - by_dist[0].0 < 1.0 {
                    return None;
                }
                let target = by_dist[0].1;
                let route = self.route(ja, self.poi_node[target])?;
                let names: Vec<&str> = picks.iter().map(|&i| pois[i].name.as_str()).collect();
                let mut context = String::new();
                for &i in &picks {
                    let r = self.route(ja, self.poi_node[i])?;
                    context.push_str(&format!("Route from {} to {}:\n{}\n", pois[a].name, pois[i].name, render_route_context(&r)));
                }
                let mut ids = vec![pois[a].id.clone()];
                ids.extend(picks.iter().map(|&i| pois[i].id.clone()));
                Some(Built {
                    ids,
                    stops: vec![ja, self.poi_node[target]],
                    stem_subject: format!(
                        "from {} to whichever of {}, {} and {} is closest to it by walking",
                        pois[a].name, names[0], names[1], names[2]
                    ),
                    target: format!("that place lie from {}", pois[a].name),
                    context: context.trim_end().to_string(),
                    route,
                })
            }
            "multi_leg" => {
                let mut stops = vec![rng.random_range(0..self.graph.node_count())];
                for _ in 0..3 {
                    let next = self.node_within_window(rng, *stops.last()?)?;
                    stops.push(next);
                }
                if stops[0] == stops[3] {
                    return None;
                }
                let mut route = Route::empty();
                for w in stops.windows(2) {
                    route = route.join(self.route(w[0], w[1])?);
                }
                let names: Vec<String> = stops.iter().map(|&s| self.junction(s)).collect();
                Some(Built {
                    ids: Vec::new(),
                    context: format!("A walk visiting {} in turn:\n{}", names.join(", "), render_route_context(&route)),
                    stem_subject: format!("from {} through {} and {} to {}", names[0], names[1], names[2], names[3]),
                    target: format!("{} lie from {}", names[3], names[0]),
                    stops,
                    route,
                })
            }
            _ => None,
        }
    }

    fn make(&self, task: &str, rng: &mut ChaCha8Rng) -> Option<(Draft, LeakKey)> {
        let (kind, rest) = task.split_once('_')?;
        let (variant, with_context) = match rest.rsplit_once('_')? {
            (v, "ctx") => (v, true),
            (v, "noctx") => (v, false),
            _ => return None,
        };
        let b = self.build(variant, rng)?;
        let (question, choices, answer) = if kind == "distance" {
            let j = distance_bucket(b.route.total_length_m);
            let pool: Vec<String> = [j - 1, j + 1, j + 2].iter().map(|&k| bucket_label(k)).collect();
            let (choices, answer) = make_choices(&bucket_label(j), &pool, 4, rng).ok()?;
            (format!("How far do you walk going {}?", b.stem_subject), choices, answer)
        } else {
            let dir = route_direction(&b.route.steps)?;
            let pool: Vec<String> = Direction::ALL.iter().map(|d| d.word().to_string()).collect();
            let (choices, answer) = make_choices(dir.word(), &pool, 8, rng).ok()?;
            (format!("Going {}, in which direction does {}?", b.stem_subject, b.target), choices, answer)
        };
        let question = if with_context { format!("{}\n{}", b.context, question) } else { question };
        let stops: Vec<String> = b.stops.iter().map(|&s| self.graph.node_id(s).to_string()).collect();
        let key = LeakKey { relation: "route".into(), ids: vec![stops[0].clone(), stops[stops.len() - 1].clone()] };
        let meta = QuestionMeta { ids: b.ids, stops, ..Default::default() };
        Some((Draft { question, choices, answer, with_context, meta }, key))
    }
}

/// Distance and direction questions over routes. Route keys (first and last
/// stop) are unique across the group and avoid any key in `training`.
pub fn gen_spatial_reasoning(
    map: &CityMap,
    graph: &RoadGraph,
    spec: &BenchmarkSpec,
    training: Option<&[InstructionSample]>,
) -> Result<Vec<EvalQuestion>, BenchError> {
    spec.validate()?;
    let counts = apportion_counts(spec.spatial_reasoning_count, spec.spatial_reasoning_types.len());
    if spec.spatial_reasoning_count == 0 {
        return Ok(Vec::new());
    }
    if graph.node_count() < 2 || map.pois().is_empty() {
        return Err(BenchError::InsufficientEntities {
            task: "spatial_reasoning".into(),
            wanted: spec.spatial_reasoning_count,
            built: 0,
            reason: "need at least 2 junctions and 1 PoI".into(),
        });
    }
    let poi_node = map
        .pois()
        .iter()
        .map(|p| map.nearest_junction(p.location).and_then(|j| graph.node(&j.id)).unwrap_or(0))
        .collect();
    let ctx = Ctx { map, graph, spec, poi_node };
    let mut used: HashSet<LeakKey> = training.unwrap_or(&[]).iter().map(InstructionSample::leak_key).collect();
    let mut per_task = Vec::new();
    for (task, &count) in spec.spatial_reasoning_types.iter().zip(&counts) {
        let stream = format!("{}/{}", Group::SpatialReasoning.as_str(), task);
        let mut drafts = Vec::with_capacity(count);
        for k in 0..count {
            let mut rng = rng_for(spec.seed, &stream, k as u64);
            let found = (0..ATTEMPTS).find_map(|_| ctx.make(task, &mut rng).filter(|(_, key)| !used.contains(key)));
            let Some((draft, key)) = found else {
                return Err(BenchError::InsufficientEntities {
                    task: task.clone(),
                    wanted: count,
                    built: k,
                    reason: format!("no unused route within the {}..{} m window", spec.min_route_m, spec.max_route_m),
                });
            };
            used.insert(key);
            drafts.push(draft);
        }
        per_task.push((task.clone(), drafts));
    }
    Ok(assemble(Group::SpatialReasoning, per_task))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twenty_types() {
        let t = spatial_task_types();
        assert_eq!(t.len(), 20);
        assert_eq!(t.iter().filter(|x| x.ends_with("_ctx")).count(), 10);
    }

    #[test]
    fn buckets() {
        assert_eq!(distance_bucket(500.0), 2);
        assert_eq!(bucket_label(2), "between 400 m and 800 m");
        assert_eq!(distance_bucket(400.0), 2);
        assert_eq!(distance_bucket(399.999), 1);
        assert_eq!(bucket_label(-1), "between 50 m and 100 m");
        assert_eq!(bucket_label(-2), "between 25 m and 50 m");
    }

    #[test]
    fn legs_north_then_east() {
        let leg = |d, l| RouteStep {
            road_id: "R".into(),
            road_name: "r".into(),
            direction: d,
            length_m: l,
            from_junction: "a".into(),
            to_junction: "b".into(),
        };
        assert_eq!(route_direction(&[leg(Direction::N, 300.0), leg(Direction::E, 100.0)]), Some(Direction::N));
        assert_eq!(route_direction(&[leg(Direction::E, 300.0), leg(Direction::W, 300.0)]), None);
    }
}
