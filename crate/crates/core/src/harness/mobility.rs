use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::eval::{make_choices, LABELS};
use crate::instruct::Message;
use crate::map::{CityMap, EntityKind, Poi};
use crate::seed::rng_for;

use super::extract::{extract_choice, normalize_name};
use super::ChatModel;

/// Candidate places shown in the multiple-choice prompt.
pub const MOBILITY_CHOICES: usize = 9;
/// Distractors come from PoIs this close to the true next place when possible.
pub const DISTRACTOR_RADIUS_M: f64 = 2000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub poi: String,
    /// `YYYY-MM-DDTHH:MM:SS`, optionally with a UTC offset.
    #[serde(rename = "t", alias = "time")]
    pub time: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub subject: String,
    pub visits: Vec<Visit>,
}

pub(crate) fn parse_time(s: &str) -> Option<NaiveDateTime> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.naive_utc())
        .ok()
        .or_else(|| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S").ok())
        .or_else(|| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S").ok())
}

impl TrajectoryRecord {
    pub fn validate(&self, map: &CityMap) -> Result<(), HarnessError> {
        if self.visits.len() < 2 {
            return Err(HarnessError::TrajectoryTooShort { subject: self.subject.clone(), visits: self.visits.len() });
        }
        let mut prev = None;
        for v in &self.visits {
            if map.poi(&v.poi).is_none() {
                return Err(HarnessError::Invalid(format!("trajectory {:?} visits unknown PoI {:?}", self.subject, v.poi)));
            }
            let t = parse_time(&v.time)
                .ok_or_else(|| HarnessError::Invalid(format!("trajectory {:?}: bad timestamp {:?}", self.subject, v.time)))?;
            if prev.is_some_and(|p| t <= p) {
                return Err(HarnessError::NonMonotonicTrajectory(self.subject.clone()));
            }
            prev = Some(t);
        }
        Ok(())
    }
}

/// Read and validate a JSONL trajectory file.
pub fn read_trajectories(path: impl AsRef<Path>, map: &CityMap) -> Result<Vec<TrajectoryRecord>, HarnessError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TrajectoryRecord =
            serde_json::from_str(&line).map_err(|e| HarnessError::Parse { line: i + 1, message: e.to_string() })?;
        rec.validate(map)?;
        out.push(rec);
    }
    Ok(out)
}

/// One next-place prediction built from a trajectory: everything but the last
/// visit is history, the last visit is the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityItem {
    pub subject: String,
    pub target_poi: String,
    pub target_name: String,
    pub choices: Vec<String>,
    pub answer: usize,
    pub prompt_multi: String,
    pub prompt_gen: String,
}

fn history_block(rec: &TrajectoryRecord, map: &CityMap) -> String {
    let mut s = String::from("Here is a sequence of places a person visited, as [place, time]:");
    for v in &rec.visits[..rec.visits.len() - 1] {
        let name = map.poi(&v.poi).map(|p| p.name.as_str()).unwrap_or(&v.poi);
        s.push_str(&format!("\n[{name}, {}]", v.time));
    }
    let next = &rec.visits[rec.visits.len() - 1];
    s.push_str(&format!("\nWhere does the person go next, at {}?", next.time));
    s
}

/// Names of nearby PoIs of the same category when there are enough of them,
/// else of any nearby PoI, else of the nearest PoIs in the city.
fn distractor_pool(map: &CityMap, target: &Poi) -> Vec<String> {
    let enough = |pool: &[&Poi]| pool.iter().filter(|p| p.name != target.name).map(|p| &p.name).collect::<HashSet<_>>().len() >= MOBILITY_CHOICES - 1;
    let near: Vec<&Poi> = map
        .nearby_entities(target.location, DISTRACTOR_RADIUS_M, &[EntityKind::Poi])
        .into_iter()
        .filter_map(|e| map.poi(&e.id))
        .collect();
    let same: Vec<&Poi> = near.iter().copied().filter(|p| p.category == target.category).collect();
    let chosen = if enough(&same) {
        same
    } else if enough(&near) {
        near
    } else {
        map.nearest_of_kinds(target.location, map.pois().len(), &[EntityKind::Poi]).into_iter().filter_map(|e| map.poi(&e.id)).collect()
    };
    chosen.into_iter().map(|p| p.name.clone()).collect()
}

pub fn mobility_prompts(records: &[TrajectoryRecord], map: &CityMap, seed: u64) -> Result<Vec<MobilityItem>, HarnessError> {
    records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            rec.validate(map)?;
            let target = &rec.visits[rec.visits.len() - 1];
            let tpoi = map.poi(&target.poi).ok_or_else(|| HarnessError::Invalid(target.poi.clone()))?;
            let pool = distractor_pool(map, tpoi);
            let mut rng = rng_for(seed, "mobility", i as u64);
            let (choices, answer) = make_choices(&tpoi.name, &pool, MOBILITY_CHOICES, &mut rng)
                .map_err(|e| HarnessError::Invalid(format!("trajectory {:?}: {e}", rec.subject)))?;
            let history = history_block(rec, map);
            let mut multi = history.clone();
            for (label, c) in LABELS.iter().zip(&choices) {
                multi.push_str(&format!("\n{label}. {c}"));
            }
            multi.push_str("\nAnswer with the letter of the correct option.");
            let gen = format!("{history}\nAnswer with the name of the place only.");
            Ok(MobilityItem {
                subject: rec.subject.clone(),
                target_poi: tpoi.id.clone(),
                target_name: tpoi.name.clone(),
                choices,
                answer,
                prompt_multi: multi,
                prompt_gen: gen,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityTranscript {
    pub subject: String,
    pub multi_response: Option<String>,
    pub gen_response: Option<String>,
    pub multi_correct: bool,
    pub gen_correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityResult {
    pub n: usize,
    pub acc_multi: f64,
    pub acc_gen: f64,
    pub transcripts: Vec<MobilityTranscript>,
}

/// True when the first non-empty line of a free-form answer names the target.
fn gen_matches(response: &str, target: &str) -> bool {
    let line = response.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    let norm = normalize_name(line);
    let norm = norm.strip_prefix("the answer is ").unwrap_or(&norm);
    norm == normalize_name(target)
}

pub async fn run_mobility_prediction(
    items: &[MobilityItem],
    model: &dyn ChatModel,
    max_in_flight: usize,
) -> MobilityResult {
    let mut rows: Vec<(usize, MobilityTranscript)> = stream::iter(items.iter().enumerate())
        .map(|(i, item)| async move {
            let multi = model.complete(&[Message::user(item.prompt_multi.clone())]).await.ok();
            let gen = model.complete(&[Message::user(item.prompt_gen.clone())]).await.ok();
            let multi_correct = multi.as_deref().and_then(|r| extract_choice(r, &item.choices)) == Some(item.answer);
            let gen_correct = gen.as_deref().is_some_and(|r| gen_matches(r, &item.target_name));
            (
                i,
                MobilityTranscript {
                    subject: item.subject.clone(),
                    multi_response: multi,
                    gen_response: gen,
                    multi_correct,
                    gen_correct,
                },
            )
        })
        .buffer_unordered(max_in_flight.max(1))
        .collect()
        .await;
    rows.sort_by_key(|(i, _)| *i);
    let transcripts: Vec<MobilityTranscript> = rows.into_iter().map(|(_, t)| t).collect();
    let n = transcripts.len();
    let rate = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    MobilityResult {
        n,
        acc_multi: rate(transcripts.iter().filter(|t| t.multi_correct).count()),
        acc_gen: rate(transcripts.iter().filter(|t| t.gen_correct).count()),
        transcripts,
    }
}
