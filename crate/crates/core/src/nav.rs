//! Step-based street navigation between AoIs. The agent stands on a junction,
//! sees a position hint and the roads leaving it, and picks one per step.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::NavError;
use crate::geo::{bearing, haversine, Direction, GeoPoint};
use crate::map::CityMap;
use crate::routing::RoadGraph;
use crate::seed::rng_for;

pub const SUCCESS_RADIUS_M: f64 = 500.0;
pub const MAX_STEPS: usize = 30;
/// Start AoIs farther than this from every junction cannot be anchored.
pub const MAX_ANCHOR_M: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NavTask {
    pub id: String,
    pub start: String,
    pub dest: String,
    pub min_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavState {
    pub junction: String,
    pub position: GeoPoint,
    pub steps_taken: usize,
    pub invalid_actions: usize,
    pub done: bool,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LaneChoice {
    pub road_name: String,
    pub direction: Direction,
}

impl LaneChoice {
    pub fn label(&self) -> String {
        format!("{} ({})", self.road_name, self.direction.word())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub hint: Vec<String>,
    pub dest_name: String,
    pub candidates: Vec<LaneChoice>,
}

/// Everything an episode needs about its destination, computed once per task.
#[derive(Debug, Clone)]
pub struct Goal {
    pub centroid: GeoPoint,
    pub name: String,
    /// Hop count from each graph node to the nearest junction within the success radius.
    pub hops: Vec<usize>,
    /// Route length from each node to the nearest such junction.
    pub remaining_m: Vec<f64>,
}

impl Goal {
    pub fn new(task: &NavTask, map: &CityMap, graph: &RoadGraph) -> Result<Self, NavError> {
        let dest = map.aoi(&task.dest).ok_or_else(|| NavError::UnknownAoi(task.dest.clone()))?;
        let targets: Vec<usize> = (0..graph.node_count())
            .filter(|&n| haversine(graph.node_location(n), dest.centroid) <= SUCCESS_RADIUS_M)
            .collect();
        let hops = graph.hops_from(&targets);
        let mut remaining_m = vec![f64::INFINITY; graph.node_count()];
        for &t in &targets {
            for (slot, d) in remaining_m.iter_mut().zip(graph.distances_from(t)) {
                if d < *slot {
                    *slot = d;
                }
            }
        }
        Ok(Self { centroid: dest.centroid, name: dest.name.clone(), hops, remaining_m })
    }
}

fn anchor_junction(map: &CityMap, aoi_id: &str) -> Result<(String, GeoPoint), NavError> {
    let aoi = map.aoi(aoi_id).ok_or_else(|| NavError::UnknownAoi(aoi_id.to_string()))?;
    match map.nearest_junction(aoi.centroid) {
        Some(j) if j.distance_m <= MAX_ANCHOR_M => {
            let loc = map.junction(&j.id).map(|x| x.location).unwrap_or(aoi.centroid);
            Ok((j.id, loc))
        }
        _ => Err(NavError::NoNearbyJunction(aoi_id.to_string())),
    }
}

pub fn start_episode(task: &NavTask, map: &CityMap) -> Result<NavState, NavError> {
    let (junction, position) = anchor_junction(map, &task.start)?;
    let dest = map.aoi(&task.dest).ok_or_else(|| NavError::UnknownAoi(task.dest.clone()))?;
    let arrived = haversine(position, dest.centroid) <= SUCCESS_RADIUS_M;
    Ok(NavState { junction, position, steps_taken: 0, invalid_actions: 0, done: arrived, success: arrived })
}

/// Incident segments with their outward direction, sorted by road name then direction.
fn lanes(map: &CityMap, junction: &str) -> Vec<(LaneChoice, String, String)> {
    let Some(j) = map.junction(junction) else { return Vec::new() };
    let mut out: Vec<(LaneChoice, String, String)> = j
        .incident_roads
        .iter()
        .filter_map(|rid| {
            let r = map.road(rid)?;
            let far = r.other_end(junction)?;
            let to = map.junction(far)?.location;
            let direction = Direction::quantize(bearing(j.location, to).ok()?);
            Some((LaneChoice { road_name: r.name.clone(), direction }, r.id.clone(), far.to_string()))
        })
        .collect();
    out.sort();
    out
}

pub fn observe(state: &NavState, task: &NavTask, map: &CityMap) -> Result<Observation, NavError> {
    if state.done {
        return Err(NavError::EpisodeDone);
    }
    let dest = map.aoi(&task.dest).ok_or_else(|| NavError::UnknownAoi(task.dest.clone()))?;
    let hint = map.nearest_pois(state.position, 2)?;
    let hint = hint.iter().filter_map(|id| map.poi(id)).map(|p| p.name.clone()).collect();
    Ok(Observation { hint, dest_name: dest.name.clone(), candidates: lanes(map, &state.junction).into_iter().map(|l| l.0).collect() })
}

/// Apply a lane choice. Choices that are not among the candidates waste a step.
pub fn step(state: &NavState, choice: Option<&LaneChoice>, task: &NavTask, map: &CityMap) -> Result<NavState, NavError> {
    if state.done {
        return Err(NavError::EpisodeDone);
    }
    let dest = map.aoi(&task.dest).ok_or_else(|| NavError::UnknownAoi(task.dest.clone()))?;
    let mut next = state.clone();
    next.steps_taken += 1;
    let lane = choice.and_then(|c| lanes(map, &state.junction).into_iter().find(|(l, _, _)| l == c));
    match lane {
        Some((_, _, far)) => {
            next.position = map.junction(&far).map(|j| j.location).unwrap_or(state.position);
            next.junction = far;
            if haversine(next.position, dest.centroid) <= SUCCESS_RADIUS_M {
                next.done = true;
                next.success = true;
            }
        }
        None => next.invalid_actions += 1,
    }
    if next.steps_taken >= MAX_STEPS {
        next.done = true;
    }
    Ok(next)
}

/// Picks the lane whose far junction is fewest hops from the destination
/// area; ties go to shorter remaining route length, then road name.
pub fn oracle_agent(obs: &Observation, state: &NavState, map: &CityMap, graph: &RoadGraph, goal: &Goal) -> Option<LaneChoice> {
    let options = lanes(map, &state.junction);
    obs.candidates
        .iter()
        .filter_map(|c| {
            let (_, _, far) = options.iter().find(|(l, _, _)| l == c)?;
            let node = graph.node(far)?;
            Some((goal.hops[node], goal.remaining_m[node], c))
        })
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then_with(|| a.2.cmp(b.2)))
        .map(|(_, _, c)| c.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub task_id: String,
    pub step: usize,
    pub observation: Observation,
    pub choice: Option<LaneChoice>,
    pub distance_to_dest_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task_id: String,
    pub success: bool,
    /// Steps to success, or [`MAX_STEPS`] for a failed episode.
    pub steps: usize,
    pub invalid_actions: usize,
    pub log: Vec<StepLog>,
}

impl EpisodeResult {
    pub fn from_state(task: &NavTask, state: &NavState, log: Vec<StepLog>) -> Self {
        Self {
            task_id: task.id.clone(),
            success: state.success,
            steps: if state.success { state.steps_taken } else { MAX_STEPS },
            invalid_actions: state.invalid_actions,
            log,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub success_rate: f64,
    pub mean_steps: f64,
}

pub fn summarize(results: &[EpisodeResult]) -> SuiteSummary {
    if results.is_empty() {
        return SuiteSummary { success_rate: 0.0, mean_steps: 0.0 };
    }
    let n = results.len() as f64;
    SuiteSummary {
        success_rate: results.iter().filter(|r| r.success).count() as f64 / n,
        mean_steps: results.iter().map(|r| r.steps as f64).sum::<f64>() / n,
    }
}

/// Drive one episode with a synchronous policy; `None` from the policy is an invalid action.
pub fn run_episode<P>(task: &NavTask, map: &CityMap, mut policy: P) -> Result<EpisodeResult, NavError>
where
    P: FnMut(&Observation, &NavState) -> Option<LaneChoice>,
{
    let dest = map.aoi(&task.dest).ok_or_else(|| NavError::UnknownAoi(task.dest.clone()))?.centroid;
    let mut state = start_episode(task, map)?;
    let mut log = Vec::new();
    while !state.done {
        let obs = observe(&state, task, map)?;
        let choice = policy(&obs, &state);
        let next = step(&state, choice.as_ref(), task, map)?;
        log.push(StepLog {
            task_id: task.id.clone(),
            step: next.steps_taken,
            observation: obs,
            choice,
            distance_to_dest_m: haversine(next.position, dest),
        });
        state = next;
    }
    Ok(EpisodeResult::from_state(task, &state, log))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavSuiteConfig {
    pub count: usize,
    pub seed: u64,
    pub target_mean: f64,
    pub max_min_steps: usize,
}

impl Default for NavSuiteConfig {
    fn default() -> Self {
        Self { count: 21, seed: 0, target_mean: 4.5, max_min_steps: 6 }
    }
}

/// Per-task `min_steps` targets: one of each value `1..=max` first, the rest
/// spread so the overall mean is as close to `target_mean` as integers allow.
pub fn min_step_targets(count: usize, target_mean: f64, max: usize) -> Vec<usize> {
    let covered = count.min(max);
    let mut out: Vec<usize> = (1..=covered).collect();
    let rest = count - covered;
    if rest > 0 {
        let total = (target_mean * count as f64).round() as usize;
        let remaining = total.saturating_sub(out.iter().sum::<usize>()).clamp(rest, rest * max);
        let (base, extra) = (remaining / rest, remaining % rest);
        out.extend((0..rest).map(|i| base + usize::from(i < extra)));
    }
    out
}

pub fn gen_nav_suite(map: &CityMap, graph: &RoadGraph, config: &NavSuiteConfig) -> Result<Vec<NavTask>, NavError> {
    if map.aois().len() < 2 {
        return Err(NavError::MapTooSmall(format!("{} AoIs, need at least 2", map.aois().len())));
    }
    let starts: Vec<Option<usize>> = map
        .aois()
        .iter()
        .map(|a| anchor_junction(map, &a.id).ok().and_then(|(j, _)| graph.node(&j)))
        .collect();
    // min_steps for every ordered AoI pair
    let mut by_steps: Vec<Vec<(usize, usize)>> = vec![Vec::new(); config.max_min_steps + 1];
    for (d, dest) in map.aois().iter().enumerate() {
        let probe = NavTask { id: String::new(), start: String::new(), dest: dest.id.clone(), min_steps: 0 };
        let goal = Goal::new(&probe, map, graph)?;
        for (s, start) in starts.iter().enumerate() {
            let Some(node) = *start else { continue };
            let h = goal.hops[node];
            if s != d && (1..=config.max_min_steps).contains(&h) {
                by_steps[h].push((s, d));
            }
        }
    }
    let mut rng = rng_for(config.seed, "nav-suite", 0);
    for pairs in &mut by_steps {
        pairs.shuffle(&mut rng);
    }
    let mut used = HashSet::new();
    let mut tasks = Vec::with_capacity(config.count);
    for (i, target) in min_step_targets(config.count, config.target_mean, config.max_min_steps).into_iter().enumerate() {
        let pick = by_steps[target].iter().find(|p| !used.contains(*p)).copied();
        let Some((s, d)) = pick else {
            return Err(NavError::MapTooSmall(format!("no unused AoI pair {target} steps apart")));
        };
        used.insert((s, d));
        tasks.push(NavTask {
            id: format!("nav-{i:03}"),
            start: map.aois()[s].id.clone(),
            dest: map.aois()[d].id.clone(),
            min_steps: target,
        });
    }
    Ok(tasks)
}
