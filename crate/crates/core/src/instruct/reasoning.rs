use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::geo::{planar_bearing, Direction};
use crate::routing::{RoadGraph, RouteStep};
use crate::seed::{rng_for, sub_seed};

use super::citywalk::{check_graph, render_route_context, sample_od};
use super::{apportion, sample_id, InstructionSample, Message, SampleMeta, Source, TemplateSet};

/// Net displacement shorter than this cannot be given a direction; such routes are resampled.
pub const MIN_NET_DISPLACEMENT_M: f64 = 1.0;
const RESAMPLE_LIMIT: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReasoningKind {
    Distance,
    Direction,
}

impl ReasoningKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReasoningKind::Distance => "distance",
            ReasoningKind::Direction => "direction",
        }
    }

    pub fn complement(self) -> Self {
        match self {
            ReasoningKind::Distance => ReasoningKind::Direction,
            ReasoningKind::Direction => ReasoningKind::Distance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChainState {
    Distance { total_m: f64 },
    /// Meters walked per compass direction, indexed like [`Direction::ALL`].
    Direction { per_direction_m: [f64; 8] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub text: String,
    pub state: ChainState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningChain {
    pub kind: ReasoningKind,
    pub steps: Vec<ChainStep>,
    pub final_answer: String,
}

impl ReasoningChain {
    pub fn render(&self) -> String {
        let mut lines: Vec<&str> = self.steps.iter().map(|s| s.text.as_str()).collect();
        lines.push(&self.final_answer);
        lines.join("\n")
    }
}

pub fn round_to_10(meters: f64) -> i64 {
    ((meters / 10.0).round() * 10.0) as i64
}

/// Running sum over leg lengths.
pub fn distance_chain(legs: &[RouteStep], origin: &str, dest: &str) -> ReasoningChain {
    let mut total = 0.0;
    let mut steps = Vec::with_capacity(legs.len());
    for (i, leg) in legs.iter().enumerate() {
        total += leg.length_m;
        let text = if i == 0 {
            format!("Leg 1 along {} is {:.0} m, so far {:.0} m.", leg.road_name, leg.length_m, total)
        } else {
            format!("Leg {} along {} adds {:.0} m, so far {:.0} m.", i + 1, leg.road_name, leg.length_m, total)
        };
        steps.push(ChainStep { text, state: ChainState::Distance { total_m: total } });
    }
    let final_answer =
        format!("The distance from junction {origin} to junction {dest} is about {} meters.", round_to_10(total));
    ReasoningChain { kind: ReasoningKind::Distance, steps, final_answer }
}

/// East and north components of the walked displacement.
pub fn net_displacement(per_direction_m: &[f64; 8]) -> (f64, f64) {
    Direction::ALL.iter().fold((0.0, 0.0), |(e, n), d| {
        let (ue, un) = d.unit();
        (e + ue * per_direction_m[d.index()], n + un * per_direction_m[d.index()])
    })
}

/// Group legs by direction, then project to a net bearing. `None` when the
/// route returns to (nearly) where it started.
pub fn direction_chain(legs: &[RouteStep], origin: &str, dest: &str) -> Option<ReasoningChain> {
    let mut acc = [0.0f64; 8];
    let mut steps = Vec::with_capacity(legs.len() + 1);
    for (i, leg) in legs.iter().enumerate() {
        acc[leg.direction.index()] += leg.length_m;
        steps.push(ChainStep {
            text: format!(
                "Leg {} goes {} for {:.0} m, total heading {} is now {:.0} m.",
                i + 1,
                leg.direction.word(),
                leg.length_m,
                leg.direction.word(),
                acc[leg.direction.index()]
            ),
            state: ChainState::Direction { per_direction_m: acc },
        });
    }
    let (e, n) = net_displacement(&acc);
    if e.hypot(n) < MIN_NET_DISPLACEMENT_M {
        return None;
    }
    let dir = Direction::quantize(planar_bearing(e, n)?);
    let (we, wn) = (if e >= 0.0 { "east" } else { "west" }, if n >= 0.0 { "north" } else { "south" });
    steps.push(ChainStep {
        text: format!("Combining the legs gives {:.0} m {we} and {:.0} m {wn}.", e.abs(), n.abs()),
        state: ChainState::Direction { per_direction_m: acc },
    });
    let final_answer = format!("So junction {dest} lies to the {} of junction {origin}.", dir.word());
    Some(ReasoningChain { kind: ReasoningKind::Direction, steps, final_answer })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityReasoningConfig {
    pub count: usize,
    pub seed: u64,
    pub two_round_fraction: f64,
    /// Share of distance questions among first rounds.
    pub distance_share: f64,
    pub min_route_m: f64,
    pub max_route_m: f64,
}

impl CityReasoningConfig {
    pub fn new(count: usize, seed: u64) -> Self {
        Self { count, seed, two_round_fraction: 0.13, distance_share: 0.5, min_route_m: 500.0, max_route_m: 5000.0 }
    }
}

pub fn gen_cityreasoning(
    graph: &RoadGraph,
    templates: &TemplateSet,
    config: &CityReasoningConfig,
) -> Result<Vec<InstructionSample>, SynthError> {
    if !(0.0..=1.0).contains(&config.two_round_fraction) || !(0.0..=1.0).contains(&config.distance_share) {
        return Err(SynthError::Config("two_round_fraction and distance_share must lie in [0, 1]".into()));
    }
    if config.count == 0 {
        return Ok(Vec::new());
    }
    check_graph(graph)?;
    for t in ["distance", "direction", "distance_followup", "direction_followup"] {
        templates.get(t)?;
    }

    let n = config.count;
    let split = apportion(n, &[config.distance_share, 1.0 - config.distance_share]);
    let mut kinds: Vec<ReasoningKind> = std::iter::repeat_n(ReasoningKind::Distance, split[0])
        .chain(std::iter::repeat_n(ReasoningKind::Direction, split[1]))
        .collect();
    kinds.shuffle(&mut rng_for(config.seed, "cityreasoning-kinds", 0));
    let two_round = (n as f64 * config.two_round_fraction).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(config.seed, "cityreasoning-rounds", 0));
    let mut has_followup = vec![false; n];
    for &i in &order[..two_round] {
        has_followup[i] = true;
    }
    // occurrence index per template type gives full template coverage
    let mut seen = std::collections::HashMap::new();
    let mut next = |key: String| {
        let c = seen.entry(key).or_insert(0usize);
        *c += 1;
        *c - 1
    };
    let slots: Vec<(usize, Option<usize>)> = (0..n)
        .map(|i| {
            let first = next(kinds[i].as_str().to_string());
            let second = has_followup[i].then(|| next(format!("{}_followup", kinds[i].complement().as_str())));
            (first, second)
        })
        .collect();

    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(config.seed, "cityreasoning", i as u64);
            let kind = kinds[i];
            let (first_t, second_t) = slots[i];
            for _ in 0..RESAMPLE_LIMIT {
                let (o, d) = sample_od(graph, &mut rng, config.min_route_m, config.max_route_m)?;
                let route = graph.shortest_path_nodes(o, d)?;
                let (oid, did) = (graph.node_id(o).to_string(), graph.node_id(d).to_string());
                let dist = distance_chain(&route.steps, &oid, &did);
                let Some(dir) = direction_chain(&route.steps, &oid, &did) else { continue };
                let (primary, secondary) = match kind {
                    ReasoningKind::Distance => (dist, dir),
                    ReasoningKind::Direction => (dir, dist),
                };
                let context = render_route_context(&route);
                let t1 = first_t % templates.count(kind.as_str());
                let q1 =
                    templates.render(kind.as_str(), t1, &[("route", &context), ("origin", &oid), ("dest", &did)])?;
                let mut messages = vec![Message::user(q1), Message::assistant(primary.render())];
                let mut used = vec![t1];
                let mut followup_type = None;
                if let Some(k) = second_t {
                    let ft = format!("{}_followup", kind.complement().as_str());
                    let t2 = k % templates.count(&ft);
                    messages.push(Message::user(templates.render(&ft, t2, &[("origin", &oid), ("dest", &did)])?));
                    messages.push(Message::assistant(secondary.render()));
                    used.push(t2);
                    followup_type = Some(ft);
                }
                return Ok(InstructionSample {
                    id: sample_id(Source::CityReasoning, i),
                    source: Source::CityReasoning,
                    messages,
                    meta: SampleMeta {
                        question_type: kind.as_str().into(),
                        route: Some(route.junctions().iter().map(|s| s.to_string()).collect()),
                        entities: vec![oid, did],
                        followup_type,
                        templates: used,
                        seed: sub_seed(config.seed, "cityreasoning", i as u64),
                    },
                });
            }
            Err(SynthError::NoOdPair { min_m: config.min_route_m, max_m: config.max_route_m, attempts: RESAMPLE_LIMIT as usize })
        })
        .collect()
}
