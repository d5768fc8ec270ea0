use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand_chacha::ChaCha8Rng;

use crate::error::BenchError;
use crate::instruct::apportion_counts;
use crate::map::{Aoi, CityMap, EntityKind};

use super::{assemble, build_task, make_choices, make_entity_choices, BenchmarkSpec, Draft, EvalQuestion, Group, QuestionMeta};

pub const URBAN_SEMANTICS_TYPES: [&str; 6] = [
    "function_from_poi_list",
    "function_from_histogram",
    "missing_category",
    "dominant_category",
    "region_with_function",
    "out_of_place_poi",
];

struct Ctx<'a> {
    map: &'a CityMap,
    spec: &'a BenchmarkSpec,
    /// AoIs with at least three PoIs, paired with their function when one category dominates.
    regions: Vec<(&'a Aoi, Option<String>)>,
    functions: Vec<String>,
    categories: Vec<String>,
}

impl<'a> Ctx<'a> {
    fn draft(q: String, choices: Vec<String>, answer: usize, meta: QuestionMeta) -> Draft {
        Draft { question: q, choices, answer, with_context: false, meta }
    }

    fn functional(&self, rng: &mut ChaCha8Rng) -> Option<(&'a Aoi, String)> {
        let (a, f) = self.regions.choose(rng)?;
        Some((*a, f.clone()?))
    }

    fn make(&self, task: &str, rng: &mut ChaCha8Rng) -> Option<Draft> {
        let map = self.map;
        let n = self.spec.choices;
        match task {
            "function_from_poi_list" | "function_from_histogram" => {
                let (a, function) = self.functional(rng)?;
                let (choices, answer) = make_choices(&function, &self.functions, n, rng).ok()?;
                let q = if task == "function_from_poi_list" {
                    let names: Vec<&str> = a.pois.iter().filter_map(|id| map.poi(id)).map(|p| p.name.as_str()).collect();
                    format!("The area {} contains these places: {}. What is the potential function of {}?", a.name, names.join(", "), a.name)
                } else {
                    let hist: Vec<String> = map.category_counts(a).iter().map(|(c, k)| format!("{c}: {k}")).collect();
                    format!("An area holds the following numbers of places per category: {}. What is the most likely function of this area?", hist.join(", "))
                };
                Some(Self::draft(q, choices, answer, QuestionMeta { ids: vec![a.id.clone()], ..Default::default() }))
            }
            "missing_category" => {
                let (a, _) = self.regions.choose(rng)?;
                let present: Vec<String> = map.category_counts(a).into_keys().collect();
                if present.len() < 2 {
                    return None;
                }
                let removed = present.choose(rng)?.clone();
                let absent: Vec<String> = self.categories.iter().filter(|c| !present.contains(c)).cloned().collect();
                let (choices, answer) = make_choices(&removed, &absent, n, rng).ok()?;
                let listed: Vec<&str> = present.iter().filter(|c| **c != removed).map(String::as_str).collect();
                let q = format!(
                    "The area {} has places of these categories, but one of its categories was left out of the list: {}. Which category is most likely missing?",
                    a.name,
                    listed.join(", ")
                );
                let meta = QuestionMeta { ids: vec![a.id.clone()], param: Some(removed), ..Default::default() };
                Some(Self::draft(q, choices, answer, meta))
            }
            "dominant_category" => {
                let (a, f) = self.regions.choose(rng)?;
                f.as_ref()?;
                let dominant = map.dominant_category(a)?;
                let mut pool: Vec<String> = map.category_counts(a).into_keys().collect();
                let mut absent: Vec<String> = self.categories.iter().filter(|c| !pool.contains(c)).cloned().collect();
                absent.shuffle(rng);
                pool.extend(absent);
                pool.retain(|c| *c != dominant);
                pool.truncate(n - 1);
                let (choices, answer) = make_choices(&dominant, &pool, n, rng).ok()?;
                let q = format!("Which category of places is the most common in {}?", a.name);
                Some(Self::draft(q, choices, answer, QuestionMeta { ids: vec![a.id.clone()], ..Default::default() }))
            }
            "region_with_function" => {
                let (a, function) = self.functional(rng)?;
                let pool: Vec<(String, String)> = self
                    .regions
                    .iter()
                    .filter(|(b, f)| f.as_ref().is_some_and(|f| *f != function) && b.name != a.name)
                    .map(|(b, _)| (b.id.clone(), b.name.clone()))
                    .collect();
                let (choices, option_ids, answer) = make_entity_choices((&a.id, &a.name), &pool, n, rng).ok()?;
                let q = format!("Which of these areas most likely serves the function of {function}?");
                let meta = QuestionMeta { ids: Vec::new(), option_ids, param: Some(function), ..Default::default() };
                Some(Self::draft(q, choices, answer, meta))
            }
            "out_of_place_poi" => {
                let (a, _) = self.regions.choose(rng)?;
                let members: BTreeSet<&str> = a.pois.iter().map(String::as_str).collect();
                let member_names: BTreeSet<&str> = a.pois.iter().filter_map(|id| map.poi(id)).map(|p| p.name.as_str()).collect();
                let present: BTreeSet<String> = map.category_counts(a).into_keys().collect();
                let outsiders: Vec<_> = map
                    .nearby_entities(a.centroid, self.spec.distractor_radius_m, &[EntityKind::Poi])
                    .into_iter()
                    .filter_map(|e| map.poi(&e.id))
                    .filter(|p| !members.contains(p.id.as_str()) && !member_names.contains(p.name.as_str()))
                    .filter(|p| map.aois_containing(p.location).iter().all(|x| x.id != a.id))
                    .collect();
                // prefer a category the area lacks; otherwise any outsider
                let odd: Vec<_> = outsiders.iter().filter(|p| !present.contains(&p.category)).copied().collect();
                let pick = odd.first().or(outsiders.first()).copied()?;
                let pool: Vec<(String, String)> =
                    a.pois.iter().filter_map(|id| map.poi(id)).map(|p| (p.id.clone(), p.name.clone())).collect();
                let (choices, option_ids, answer) = make_entity_choices((&pick.id, &pick.name), &pool, n, rng).ok()?;
                let q = format!("Which of the following places is out of place, because it is not located in {}?", a.name);
                let meta = QuestionMeta { ids: vec![a.id.clone()], option_ids, ..Default::default() };
                Some(Self::draft(q, choices, answer, meta))
            }
            _ => None,
        }
    }
}

pub fn gen_urban_semantics(map: &CityMap, spec: &BenchmarkSpec) -> Result<Vec<EvalQuestion>, BenchError> {
    spec.validate()?;
    let regions: Vec<(&Aoi, Option<String>)> =
        map.aois().iter().filter(|a| a.pois.len() >= 3).map(|a| (a, map.aoi_function(a))).collect();
    let counts = apportion_counts(spec.urban_semantics_count, spec.urban_semantics_types.len());
    if regions.is_empty() && counts.iter().any(|&c| c > 0) {
        return Err(BenchError::InsufficientEntities {
            task: "urban_semantics".into(),
            wanted: spec.urban_semantics_count,
            built: 0,
            reason: "no AoI holds at least 3 PoIs".into(),
        });
    }
    let mut functions: Vec<String> = map.taxonomy().functions().map(str::to_string).collect();
    functions.sort();
    functions.dedup();
    let ctx = Ctx { map, spec, regions, functions, categories: map.taxonomy().names().map(str::to_string).collect() };
    let mut per_task = Vec::new();
    for (task, &count) in spec.urban_semantics_types.iter().zip(&counts) {
        let drafts = build_task(Group::UrbanSemantics, task, count, spec.seed, |rng| ctx.make(task, rng))?;
        per_task.push((task.clone(), drafts));
    }
    Ok(assemble(Group::UrbanSemantics, per_task))
}
