use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::instruct::Message;
use crate::map::CityMap;

use super::extract::normalize_name;
use super::metrics::{daily_locations, histogram, jsd, radius_of_gyration, step_distances, DAILY_LOC_BINS, DISTANCE_BINS, RADIUS_BINS};
use super::mobility::{TrajectoryRecord, Visit};
use super::ChatModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgendaItem {
    /// `HH:MM`
    pub time: String,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agenda {
    #[serde(rename = "agenda_id", alias = "id")]
    pub id: String,
    /// `YYYY-MM-DD`; agendas without one are placed on [`DEFAULT_DATE`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
    pub items: Vec<AgendaItem>,
}

pub const DEFAULT_DATE: &str = "1970-01-01";

impl Agenda {
    pub fn day(&self) -> &str {
        self.date.as_deref().unwrap_or(DEFAULT_DATE)
    }
}

pub fn read_agendas(path: impl AsRef<Path>) -> Result<Vec<Agenda>, HarnessError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| HarnessError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

pub fn trajectory_prompt(agenda: &Agenda) -> String {
    let mut s = match &agenda.date {
        Some(d) => format!("Plan a day in the city on {d}."),
        None => "Plan a day in the city.".to_string(),
    };
    s.push_str(" For each agenda item, name the specific place you would go to.");
    for item in &agenda.items {
        s.push_str(&format!("\n{} {}", item.time, item.action));
    }
    s.push_str("\nReply with one line per item in the form `HH:MM | place name`.");
    s
}

/// Turn a `HH:MM | place` reply into visits; returns the visits and how many
/// lines named a place the map does not have.
fn parse_reply(reply: &str, date: &str, names: &HashMap<String, String>) -> (Vec<Visit>, usize) {
    let mut visits = Vec::new();
    let mut unmatched = 0;
    for line in reply.lines() {
        let Some((time, place)) = line.split_once('|') else { continue };
        let time = time.trim().trim_matches('`');
        let place = normalize_name(place);
        if place.is_empty() {
            continue;
        }
        match names.get(&place) {
            Some(id) => visits.push(Visit { poi: id.clone(), time: format!("{date}T{time}:00") }),
            None => unmatched += 1,
        }
    }
    (visits, unmatched)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryGenResult {
    pub generated: Vec<TrajectoryRecord>,
    pub unmatched_places: usize,
    pub jsd_radius: f64,
    pub jsd_distance: f64,
    pub jsd_dailyloc: f64,
}

struct Distributions {
    radius: Vec<f64>,
    distance: Vec<f64>,
    dailyloc: Vec<f64>,
}

fn distributions(records: &[TrajectoryRecord], map: &CityMap) -> Distributions {
    let mut radius = Vec::new();
    let mut distance = Vec::new();
    for r in records {
        let pts: Vec<_> = r.visits.iter().filter_map(|v| map.poi(&v.poi)).map(|p| p.location).collect();
        if let Some(rg) = radius_of_gyration(&pts) {
            radius.push(rg);
        }
        distance.extend(step_distances(&pts));
    }
    let days = daily_locations(
        records
            .iter()
            .flat_map(|r| r.visits.iter().map(move |v| (r.subject.as_str(), v.time.get(..10).unwrap_or(""), v.poi.as_str()))),
    );
    Distributions {
        radius: histogram(&radius, RADIUS_BINS),
        distance: histogram(&distance, DISTANCE_BINS),
        dailyloc: histogram(&days, DAILY_LOC_BINS),
    }
}

/// Nothing generated scores as far from the reference as possible.
fn divergence(generated: &[f64], reference: &[f64]) -> Result<f64, HarnessError> {
    if reference.iter().sum::<f64>() == 0.0 {
        return Err(HarnessError::Invalid("reference trajectories give an empty distribution".into()));
    }
    match jsd(generated, reference) {
        Err(HarnessError::EmptyHistogram) => Ok(1.0),
        other => other,
    }
}

/// Ask the model to fill each agenda with places, then compare the generated
/// trajectories with the reference ones on three distributions.
pub async fn run_trajectory_generation(
    agendas: &[Agenda],
    reference: &[TrajectoryRecord],
    map: &CityMap,
    model: &dyn ChatModel,
    max_in_flight: usize,
) -> Result<TrajectoryGenResult, HarnessError> {
    let mut names: HashMap<String, String> = HashMap::new();
    for p in map.pois() {
        names.entry(normalize_name(&p.name)).or_insert_with(|| p.id.clone());
    }
    let mut replies: Vec<(usize, Option<String>)> = stream::iter(agendas.iter().enumerate())
        .map(|(i, a)| async move { (i, model.complete(&[Message::user(trajectory_prompt(a))]).await.ok()) })
        .buffer_unordered(max_in_flight.max(1))
        .collect()
        .await;
    replies.sort_by_key(|(i, _)| *i);

    let mut generated = Vec::new();
    let mut unmatched_places = 0;
    for (i, reply) in replies {
        let (visits, missed) = parse_reply(reply.as_deref().unwrap_or(""), agendas[i].day(), &names);
        unmatched_places += missed;
        generated.push(TrajectoryRecord { subject: agendas[i].id.clone(), visits });
    }
    let g = distributions(&generated, map);
    let r = distributions(reference, map);
    Ok(TrajectoryGenResult {
        generated,
        unmatched_places,
        jsd_radius: divergence(&g.radius, &r.radius)?,
        jsd_distance: divergence(&g.distance, &r.distance)?,
        jsd_dailyloc: divergence(&g.dailyloc, &r.dailyloc)?,
    })
}
