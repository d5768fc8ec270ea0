use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::map::{CityMap, EntityKind};
use crate::routing::{RoadGraph, Route};
use crate::seed::{rng_for, sub_seed};

use super::{entity_label, sample_id, InstructionSample, Message, SampleMeta, Source, TemplateSet};

pub const OBSERVATION_RADIUS_M: f64 = 300.0;
pub const OBSERVATION_LIMIT: usize = 3;
pub const OD_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityWalkConfig {
    pub count: usize,
    pub seed: u64,
    pub min_route_m: f64,
    pub max_route_m: f64,
}

impl CityWalkConfig {
    pub fn new(count: usize, seed: u64) -> Self {
        Self { count, seed, min_route_m: 500.0, max_route_m: 5000.0 }
    }
}

/// Pick an origin uniformly, then a destination uniformly among nodes whose
/// route length from it lies in `[min_m, max_m]`.
pub(crate) fn sample_od(
    graph: &RoadGraph,
    rng: &mut ChaCha8Rng,
    min_m: f64,
    max_m: f64,
) -> Result<(usize, usize), SynthError> {
    for _ in 0..OD_ATTEMPTS {
        let o = rng.random_range(0..graph.node_count());
        let dist = graph.distances_from(o);
        let candidates: Vec<usize> =
            (0..graph.node_count()).filter(|&d| d != o && dist[d] >= min_m && dist[d] <= max_m).collect();
        if !candidates.is_empty() {
            return Ok((o, candidates[rng.random_range(0..candidates.len())]));
        }
    }
    Err(SynthError::NoOdPair { min_m, max_m, attempts: OD_ATTEMPTS })
}

pub(crate) fn check_graph(graph: &RoadGraph) -> Result<(), SynthError> {
    let largest = (0..graph.node_count()).map(|n| graph.component_of(n).len()).max().unwrap_or(0);
    if largest < 2 {
        return Err(SynthError::GraphTooSmall);
    }
    Ok(())
}

fn step_line(k: usize, step: &crate::routing::RouteStep) -> String {
    format!(
        "Step {k}: walk {} along {} for {:.0} m to junction {}.",
        step.direction.word(),
        step.road_name,
        step.length_m,
        step.to_junction
    )
}

/// Route legs as numbered lines, without observations.
pub fn render_route_context(route: &Route) -> String {
    route.steps.iter().enumerate().map(|(i, s)| step_line(i + 1, s)).collect::<Vec<_>>().join("\n")
}

fn narrate(map: &CityMap, route: &Route) -> String {
    let mut lines = Vec::with_capacity(route.steps.len() * 2 + 1);
    let last = route.steps.len().saturating_sub(1);
    for (i, s) in route.steps.iter().enumerate() {
        lines.push(step_line(i + 1, s));
        if i == last {
            break;
        }
        let Some(j) = map.junction(&s.to_junction) else { continue };
        let seen: Vec<String> = map
            .nearby_entities(j.location, OBSERVATION_RADIUS_M, &[EntityKind::Poi, EntityKind::Aoi])
            .iter()
            .take(OBSERVATION_LIMIT)
            .map(|e| format!("{} ({:.0} m)", entity_label(map, e), e.distance_m))
            .collect();
        if !seen.is_empty() {
            lines.push(format!("At junction {} you can see: {}.", s.to_junction, seen.join(", ")));
        }
    }
    lines.push(format!("You have arrived after {:.0} m in total.", route.total_length_m));
    lines.join("\n")
}

pub fn gen_citywalk(
    map: &CityMap,
    graph: &RoadGraph,
    templates: &TemplateSet,
    config: &CityWalkConfig,
) -> Result<Vec<InstructionSample>, SynthError> {
    if config.count == 0 {
        return Ok(Vec::new());
    }
    check_graph(graph)?;
    if !(config.min_route_m <= config.max_route_m) {
        return Err(SynthError::Config("min_route_m must not exceed max_route_m".into()));
    }
    let n_templates = templates.get("route")?.len();
    (0..config.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(config.seed, "citywalk", i as u64);
            let (o, d) = sample_od(graph, &mut rng, config.min_route_m, config.max_route_m)?;
            let route = graph.shortest_path_nodes(o, d)?;
            let (oid, did) = (graph.node_id(o).to_string(), graph.node_id(d).to_string());
            let t = i % n_templates;
            let question = templates.render("route", t, &[("origin", &oid), ("dest", &did)])?;
            Ok(InstructionSample {
                id: sample_id(Source::CityWalk, i),
                source: Source::CityWalk,
                messages: vec![Message::user(question), Message::assistant(narrate(map, &route))],
                meta: SampleMeta {
                    question_type: "route".into(),
                    route: Some(route.junctions().iter().map(|s| s.to_string()).collect()),
                    entities: vec![oid, did],
                    followup_type: None,
                    templates: vec![t],
                    seed: sub_seed(config.seed, "citywalk", i as u64),
                },
            })
        })
        .collect()
}
