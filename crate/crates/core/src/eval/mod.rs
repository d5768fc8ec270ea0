//! Multiple-choice benchmark over a city: City Image, Urban Semantics and
//! Spatial Reasoning question groups, plus leakage filtering against
//! instruction data.

mod city_image;
mod spatial;
mod urban;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::BenchError;
use crate::geo::GeoPoint;
use crate::instruct::{InstructionSample, LeakKey};
use crate::map::CityMap;
use crate::routing::RoadGraph;

pub use city_image::{gen_city_image, length_class, CITY_IMAGE_TYPES, LENGTH_CLASSES};
pub use spatial::{bucket_label, distance_bucket, gen_spatial_reasoning, route_direction, spatial_task_types, SR_VARIANTS};
pub use urban::{gen_urban_semantics, URBAN_SEMANTICS_TYPES};

pub const LABELS: [char; 10] = ['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'J'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    CityImage,
    UrbanSemantics,
    SpatialReasoning,
}

impl Group {
    pub const ALL: [Group; 3] = [Group::CityImage, Group::UrbanSemantics, Group::SpatialReasoning];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::CityImage => "city_image",
            Group::UrbanSemantics => "urban_semantics",
            Group::SpatialReasoning => "spatial_reasoning",
        }
    }

    /// Column header used in reports.
    pub fn short(self) -> &'static str {
        match self {
            Group::CityImage => "CI",
            Group::UrbanSemantics => "US",
            Group::SpatialReasoning => "SR",
        }
    }
}

/// Grounding needed to re-derive the answer from the map.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuestionMeta {
    /// Subject entity ids, in the order the stem mentions them.
    pub ids: Vec<String>,
    /// Entity (or road name) behind each choice, aligned with `choices`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub option_ids: Vec<String>,
    /// Junctions the question's route visits, in order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stops: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<GeoPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalQuestion {
    pub id: String,
    pub group: Group,
    pub task: String,
    pub question: String,
    pub choices: Vec<String>,
    pub answer: usize,
    pub with_context: bool,
    pub meta: QuestionMeta,
}

impl EvalQuestion {
    pub fn is_valid(&self) -> bool {
        let distinct: HashSet<&String> = self.choices.iter().collect();
        (4..=10).contains(&self.choices.len()) && distinct.len() == self.choices.len() && self.answer < self.choices.len()
    }

    /// Stem followed by labeled choices.
    pub fn render(&self) -> String {
        let mut s = self.question.clone();
        for (label, c) in LABELS.iter().zip(&self.choices) {
            s.push_str(&format!("\n{label}. {c}"));
        }
        s
    }

    /// Key compared against instruction samples; only route-grounded
    /// questions can leak.
    pub fn leak_key(&self) -> Option<LeakKey> {
        match (self.group, self.meta.stops.first(), self.meta.stops.last()) {
            (Group::SpatialReasoning, Some(o), Some(d)) => {
                Some(LeakKey { relation: "route".into(), ids: vec![o.clone(), d.clone()] })
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkSpec {
    pub seed: u64,
    pub city_image_count: usize,
    pub city_image_types: Vec<String>,
    pub urban_semantics_count: usize,
    pub urban_semantics_types: Vec<String>,
    pub spatial_reasoning_count: usize,
    pub spatial_reasoning_types: Vec<String>,
    /// Options per entity-choice question; direction questions always show all 8.
    pub choices: usize,
    pub landmark_categories: Vec<String>,
    pub border_gap_m: f64,
    pub adjacent_gap_m: f64,
    pub distractor_radius_m: f64,
    pub min_route_m: f64,
    pub max_route_m: f64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            city_image_count: 650,
            city_image_types: CITY_IMAGE_TYPES.iter().map(|s| s.to_string()).collect(),
            urban_semantics_count: 300,
            urban_semantics_types: URBAN_SEMANTICS_TYPES.iter().map(|s| s.to_string()).collect(),
            spatial_reasoning_count: 1000,
            spatial_reasoning_types: spatial_task_types(),
            choices: 4,
            landmark_categories: ["culture", "transport", "hotel", "entertainment", "sport"].map(String::from).to_vec(),
            border_gap_m: 50.0,
            adjacent_gap_m: 60.0,
            distractor_radius_m: 2000.0,
            min_route_m: 500.0,
            max_route_m: 5000.0,
        }
    }
}

impl BenchmarkSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if !(4..=10).contains(&self.choices) {
            return Err(BenchError::ChoiceCount(self.choices));
        }
        let known = |list: &[String], allowed: &[String], group: &str| -> Result<(), BenchError> {
            match list.iter().find(|t| !allowed.contains(t)) {
                Some(t) => Err(BenchError::Spec(format!("unknown {group} task type {t:?}"))),
                None if list.is_empty() => Err(BenchError::Spec(format!("{group} task list is empty"))),
                None => Ok(()),
            }
        };
        let own = |a: &[&str]| a.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        known(&self.city_image_types, &own(&CITY_IMAGE_TYPES), "city_image")?;
        known(&self.urban_semantics_types, &own(&URBAN_SEMANTICS_TYPES), "urban_semantics")?;
        known(&self.spatial_reasoning_types, &spatial_task_types(), "spatial_reasoning")?;
        if !(self.min_route_m > 0.0 && self.min_route_m <= self.max_route_m) {
            return Err(BenchError::Spec("route window must satisfy 0 < min_route_m <= max_route_m".into()));
        }
        if !(self.border_gap_m >= 0.0 && self.adjacent_gap_m >= 0.0 && self.distractor_radius_m > 0.0) {
            return Err(BenchError::Spec("gap and radius settings must be non-negative".into()));
        }
        Ok(())
    }
}

/// Shuffle the correct option in among `n - 1` distractors drawn from `pool`.
pub fn make_choices<R: Rng + ?Sized>(
    correct: &str,
    pool: &[String],
    n: usize,
    rng: &mut R,
) -> Result<(Vec<String>, usize), BenchError> {
    if !(4..=10).contains(&n) {
        return Err(BenchError::ChoiceCount(n));
    }
    let mut seen = HashSet::new();
    let distinct: Vec<&String> = pool.iter().filter(|p| p.as_str() != correct && seen.insert(p.as_str())).collect();
    if distinct.len() < n - 1 {
        return Err(BenchError::InsufficientDistractors { needed: n - 1, available: distinct.len() });
    }
    let mut choices: Vec<String> = distinct.choose_multiple(rng, n - 1).map(|s| (*s).clone()).collect();
    choices.shuffle(rng);
    let answer = rng.random_range(0..n);
    choices.insert(answer, correct.to_string());
    Ok((choices, answer))
}

/// Like [`make_choices`] but keeps track of the entity behind each option.
pub(crate) fn make_entity_choices<R: Rng + ?Sized>(
    correct: (&str, &str),
    pool: &[(String, String)],
    n: usize,
    rng: &mut R,
) -> Result<(Vec<String>, Vec<String>, usize), BenchError> {
    let labels: Vec<String> = pool.iter().map(|(_, l)| l.clone()).collect();
    let (choices, answer) = make_choices(correct.1, &labels, n, rng)?;
    let option_ids = choices
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i == answer {
                correct.0.to_string()
            } else {
                pool.iter().find(|(_, l)| l == c).map(|(id, _)| id.clone()).unwrap_or_default()
            }
        })
        .collect();
    Ok((choices, option_ids, answer))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DedupeReport {
    pub kept: usize,
    pub removed: usize,
}

/// Drop questions whose leak key appears among the training samples' keys.
pub fn dedupe_against_training(
    questions: Vec<EvalQuestion>,
    training: &[InstructionSample],
) -> (Vec<EvalQuestion>, DedupeReport) {
    let keys: HashSet<LeakKey> = training.iter().map(InstructionSample::leak_key).collect();
    let before = questions.len();
    let kept: Vec<EvalQuestion> =
        questions.into_iter().filter(|q| q.leak_key().is_none_or(|k| !keys.contains(&k))).collect();
    let report = DedupeReport { kept: kept.len(), removed: before - kept.len() };
    (kept, report)
}

/// All three groups under one spec.
pub fn gen_benchmark(
    map: &CityMap,
    graph: &RoadGraph,
    spec: &BenchmarkSpec,
    training: Option<&[InstructionSample]>,
) -> Result<Vec<EvalQuestion>, BenchError> {
    spec.validate()?;
    let mut out = gen_city_image(map, graph, spec)?;
    out.extend(gen_urban_semantics(map, spec)?);
    out.extend(gen_spatial_reasoning(map, graph, spec, training)?);
    Ok(out)
}

/// A question before it gets its id and group.
pub(crate) struct Draft {
    pub question: String,
    pub choices: Vec<String>,
    pub answer: usize,
    pub with_context: bool,
    pub meta: QuestionMeta,
}

/// Rejection-sampling budget per question.
pub(crate) const ATTEMPTS: usize = 200;

/// Build `count` drafts of one task in parallel; each question index gets its
/// own seeded stream and retries `make` until it yields a question.
pub(crate) fn build_task<F>(group: Group, task: &str, count: usize, seed: u64, make: F) -> Result<Vec<Draft>, BenchError>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Option<Draft> + Sync,
{
    use rayon::prelude::*;
    let stream = format!("{}/{}", group.as_str(), task);
    let drafts: Vec<Option<Draft>> = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = crate::seed::rng_for(seed, &stream, k as u64);
            (0..ATTEMPTS).find_map(|_| make(&mut rng))
        })
        .collect();
    let built = drafts.iter().filter(|d| d.is_some()).count();
    if built < count {
        return Err(BenchError::InsufficientEntities {
            task: task.to_string(),
            wanted: count,
            built,
            reason: format!("no eligible subject found within {ATTEMPTS} attempts"),
        });
    }
    let mut drafts: Vec<Draft> = drafts.into_iter().flatten().collect();
    // Redraw repeated stems from fresh streams; a small city may not have
    // enough subjects, in which case the repeat stays.
    let mut seen = std::collections::HashSet::new();
    for (k, draft) in drafts.iter_mut().enumerate() {
        if seen.insert(draft.question.clone()) {
            continue;
        }
        let fresh = (0..REDRAWS).find_map(|r| {
            let mut rng = crate::seed::rng_for(seed, &stream, (count + k * REDRAWS + r) as u64);
            make(&mut rng).filter(|d| !seen.contains(&d.question))
        });
        if let Some(d) = fresh {
            seen.insert(d.question.clone());
            *draft = d;
        }
    }
    Ok(drafts)
}

const REDRAWS: usize = 32;

/// Number the drafts of each task in order and wrap them as questions.
pub(crate) fn assemble(group: Group, per_task: Vec<(String, Vec<Draft>)>) -> Vec<EvalQuestion> {
    let mut out = Vec::new();
    for (task, drafts) in per_task {
        for d in drafts {
            out.push(EvalQuestion {
                id: question_id(group, out.len()),
                group,
                task: task.clone(),
                question: d.question,
                choices: d.choices,
                answer: d.answer,
                with_context: d.with_context,
                meta: d.meta,
            });
        }
    }
    out
}

pub(crate) fn question_id(group: Group, index: usize) -> String {
    format!("{}-{:04}", group.as_str(), index)
}

pub fn write_benchmark(questions: &[EvalQuestion], out: impl Write) -> std::io::Result<()> {
    let mut out = BufWriter::new(out);
    for q in questions {
        serde_json::to_writer(&mut out, q)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn export_benchmark(questions: &[EvalQuestion], path: impl AsRef<Path>) -> Result<(), BenchError> {
    let path = path.as_ref();
    let io = |source| BenchError::Io { path: path.to_path_buf(), source };
    write_benchmark(questions, File::create(path).map_err(io)?).map_err(io)
}

pub fn read_benchmark(path: impl AsRef<Path>) -> Result<Vec<EvalQuestion>, BenchError> {
    let path = path.as_ref();
    let io = |source| BenchError::Io { path: path.to_path_buf(), source };
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path).map_err(io)?).lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let q: EvalQuestion =
            serde_json::from_str(&line).map_err(|e| BenchError::Parse { line: i + 1, message: e.to_string() })?;
        if !q.is_valid() {
            return Err(BenchError::Parse { line: i + 1, message: "choices must be 4..=10 distinct options".into() });
        }
        out.push(q);
    }
    Ok(out)
}
