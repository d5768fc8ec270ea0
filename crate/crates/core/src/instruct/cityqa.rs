use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::map::{CityMap, EntityKind, NearbyEntity};
use crate::seed::rng_for;

use super::{apportion, entity_label, sample_id, InstructionSample, Message, SampleMeta, Source, TemplateSet};

pub const QA_TYPES: [&str; 8] = [
    "poi_category",
    "poi_address",
    "poi_coordinates",
    "poi_nearby",
    "aoi_location",
    "aoi_nearby",
    "road_relations",
    "junction_relations",
];

/// Radius for "nearby" answers and how many neighbours to list.
pub const NEARBY_RADIUS_M: f64 = 500.0;
pub const NEARBY_LIMIT: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityQaConfig {
    pub count: usize,
    pub seed: u64,
    /// Relative weight per entry of [`QA_TYPES`].
    pub type_weights: Vec<f64>,
}

impl CityQaConfig {
    pub fn new(count: usize, seed: u64) -> Self {
        Self { count, seed, type_weights: vec![1.0; QA_TYPES.len()] }
    }
}

fn kind_needed(question_type: &str) -> EntityKind {
    match question_type {
        t if t.starts_with("poi") => EntityKind::Poi,
        t if t.starts_with("aoi") => EntityKind::Aoi,
        _ => EntityKind::Junction,
    }
}

pub fn gen_cityqa(map: &CityMap, templates: &TemplateSet, config: &CityQaConfig) -> Result<Vec<InstructionSample>, SynthError> {
    if config.type_weights.len() != QA_TYPES.len() || config.type_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(SynthError::Config(format!("type_weights must hold {} non-negative values", QA_TYPES.len())));
    }
    let counts = apportion(config.count, &config.type_weights);
    for (qt, &c) in QA_TYPES.iter().zip(&counts) {
        if c == 0 {
            continue;
        }
        templates.get(qt)?;
        let empty = match *qt {
            "road_relations" => map.roads().is_empty(),
            _ => match kind_needed(qt) {
                EntityKind::Poi => map.pois().is_empty(),
                EntityKind::Aoi => map.aois().is_empty(),
                EntityKind::Junction => map.junctions().is_empty(),
            },
        };
        if empty {
            return Err(SynthError::MissingEntities(if *qt == "road_relations" { "road" } else { kind_needed(qt).as_str() }));
        }
    }

    // Exact per-type counts, shuffled; the k-th occurrence of a type uses template k.
    let mut plan: Vec<usize> = counts.iter().enumerate().flat_map(|(t, &c)| std::iter::repeat_n(t, c)).collect();
    plan.shuffle(&mut rng_for(config.seed, "cityqa-plan", 0));
    let mut seen = vec![0usize; QA_TYPES.len()];
    let occurrence: Vec<usize> = plan
        .iter()
        .map(|&t| {
            seen[t] += 1;
            seen[t] - 1
        })
        .collect();
    let road_names = map.road_names();

    plan.par_iter()
        .zip(occurrence.par_iter())
        .enumerate()
        .map(|(i, (&t, &occ))| {
            let qt = QA_TYPES[t];
            let sub_seed = crate::seed::sub_seed(config.seed, "cityqa", i as u64);
            let mut rng = rng_for(config.seed, "cityqa", i as u64);
            let (entity, slot, question_slot_value, answer) = match kind_needed(qt) {
                EntityKind::Poi => {
                    let p = &map.pois()[rng.random_range(0..map.pois().len())];
                    (p.id.clone(), "poi", p.name.clone(), poi_answer(map, qt, &p.id))
                }
                EntityKind::Aoi => {
                    let a = &map.aois()[rng.random_range(0..map.aois().len())];
                    (a.id.clone(), "aoi", a.name.clone(), aoi_answer(map, qt, &a.id))
                }
                EntityKind::Junction if qt == "road_relations" => {
                    let name = &road_names[rng.random_range(0..road_names.len())];
                    (name.clone(), "road", name.clone(), road_answer(map, name))
                }
                EntityKind::Junction => {
                    let j = &map.junctions()[rng.random_range(0..map.junctions().len())];
                    (j.id.clone(), "junction", j.id.clone(), junction_answer(map, &j.id))
                }
            };
            let template_index = occ % templates.count(qt);
            let question = templates.render(qt, template_index, &[(slot, &question_slot_value)])?;
            Ok(InstructionSample {
                id: sample_id(Source::CityQa, i),
                source: Source::CityQa,
                messages: vec![Message::user(question), Message::assistant(answer)],
                meta: SampleMeta {
                    question_type: qt.to_string(),
                    entities: vec![entity],
                    route: None,
                    followup_type: None,
                    templates: vec![template_index],
                    seed: sub_seed,
                },
            })
        })
        .collect()
}

fn nearby_list(map: &CityMap, center: crate::geo::GeoPoint, exclude: (EntityKind, &str)) -> Vec<NearbyEntity> {
    map.nearby_entities(center, NEARBY_RADIUS_M, &[EntityKind::Poi, EntityKind::Aoi, EntityKind::Junction])
        .into_iter()
        .filter(|e| !(e.kind == exclude.0 && e.id == exclude.1))
        .take(NEARBY_LIMIT)
        .collect()
}

fn describe_nearby(map: &CityMap, subject: &str, list: &[NearbyEntity]) -> String {
    if list.is_empty() {
        return format!("There is nothing else within {NEARBY_RADIUS_M:.0} m of {subject}.");
    }
    let items: Vec<String> = list.iter().map(|e| format!("{} ({:.0} m)", entity_label(map, e), e.distance_m)).collect();
    format!("Near {subject} you can find: {}.", items.join(", "))
}

fn poi_answer(map: &CityMap, qt: &str, id: &str) -> String {
    let p = map.poi(id).expect("sampled poi exists");
    match qt {
        "poi_category" => format!("{} is a {} place.", p.name, p.category),
        "poi_address" => match &p.address {
            Some(a) => format!("{} is located at {}.", p.name, a.describe()),
            None => format!("{} has no known address.", p.name),
        },
        "poi_coordinates" => format!("{} is at longitude {:.6}, latitude {:.6}.", p.name, p.location.lon, p.location.lat),
        _ => describe_nearby(map, &p.name, &nearby_list(map, p.location, (EntityKind::Poi, id))),
    }
}

fn aoi_answer(map: &CityMap, qt: &str, id: &str) -> String {
    let a = map.aoi(id).expect("sampled aoi exists");
    match qt {
        "aoi_location" => {
            let addr = a.address.as_ref().map(|d| format!(", near {}", d.describe())).unwrap_or_default();
            format!("{} is centered at longitude {:.6}, latitude {:.6}{}.", a.name, a.centroid.lon, a.centroid.lat, addr)
        }
        _ => describe_nearby(map, &a.name, &nearby_list(map, a.centroid, (EntityKind::Aoi, id))),
    }
}

fn road_answer(map: &CityMap, name: &str) -> String {
    let ends = map.road_endpoints(name);
    let connected = map.connected_roads(name);
    let span = match ends.as_slice() {
        [a, b] => format!("{name} runs between junction {a} and junction {b}."),
        [] => format!("{name} forms a loop without dead ends."),
        many => format!("{name} ends at junctions {}.", many.join(", ")),
    };
    if connected.is_empty() {
        format!("{span} It does not meet any other road.")
    } else {
        format!("{span} It connects with {}.", connected.join(", "))
    }
}

fn junction_answer(map: &CityMap, id: &str) -> String {
    let j = map.junction(id).expect("sampled junction exists");
    let roads = map.junction_road_names(id);
    let near = nearby_list(map, j.location, (EntityKind::Junction, id));
    format!("Junction {id} is where {} meet. {}", roads.join(", "), describe_nearby(map, &format!("junction {id}"), &near))
}
