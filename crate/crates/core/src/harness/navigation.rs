use futures::stream::{self, StreamExt};
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::eval::LABELS;
use crate::geo::{haversine, Direction};
use crate::instruct::Message;
use crate::map::CityMap;
use crate::nav::{observe, start_episode, step, summarize, EpisodeResult, LaneChoice, NavTask, Observation, StepLog, SuiteSummary};

use super::extract::extract_choice;
use super::ChatModel;

const DEST_PREFIX: &str = "You are walking to ";
const HINT_PREFIX: &str = "Nearby places: ";

pub fn nav_prompt(obs: &Observation) -> String {
    let mut s = format!("{DEST_PREFIX}{}.\n{HINT_PREFIX}{}\nRoads you can take:", obs.dest_name, obs.hint.join("; "));
    for (label, c) in LABELS.iter().zip(&obs.candidates) {
        s.push_str(&format!("\n{label}. {}", c.label()));
    }
    s.push_str("\nAnswer with the letter of the road to take.");
    s
}

/// Inverse of [`nav_prompt`].
pub fn parse_nav_prompt(prompt: &str) -> Option<Observation> {
    let mut lines = prompt.lines();
    let dest_name = lines.next()?.strip_prefix(DEST_PREFIX)?.strip_suffix('.')?.to_string();
    let hint_line = lines.next()?.strip_prefix(HINT_PREFIX)?;
    let hint = if hint_line.is_empty() { Vec::new() } else { hint_line.split("; ").map(str::to_string).collect() };
    let mut candidates = Vec::new();
    for line in lines {
        let Some((_, rest)) = line.split_once(". ").filter(|(l, _)| l.len() == 1) else { continue };
        let (road, dir) = rest.rsplit_once(" (")?;
        let direction: Direction = dir.strip_suffix(')')?.parse().ok()?;
        candidates.push(LaneChoice { road_name: road.to_string(), direction });
    }
    Some(Observation { hint, dest_name, candidates })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavRunResult {
    pub summary: SuiteSummary,
    pub episodes: Vec<EpisodeResult>,
}

async fn episode(task: &NavTask, map: &CityMap, model: &dyn ChatModel) -> Result<EpisodeResult, HarnessError> {
    let dest = map.aoi(&task.dest).map(|a| a.centroid).ok_or_else(|| HarnessError::Invalid(format!("unknown AoI {:?}", task.dest)))?;
    let mut state = start_episode(task, map)?;
    let mut log = Vec::new();
    while !state.done {
        let obs = observe(&state, task, map)?;
        let labels: Vec<String> = obs.candidates.iter().map(LaneChoice::label).collect();
        let choice = match model.complete(&[Message::user(nav_prompt(&obs))]).await {
            Ok(reply) => extract_choice(&reply, &labels).map(|i| obs.candidates[i].clone()),
            Err(e) => {
                log::warn!("task {}: {e}", task.id);
                None
            }
        };
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

/// Run every task with the model choosing lanes; episodes run concurrently.
pub async fn run_navigation(
    suite: &[NavTask],
    map: &CityMap,
    model: &dyn ChatModel,
    max_in_flight: usize,
) -> Result<NavRunResult, HarnessError> {
    let mut done: Vec<(usize, Result<EpisodeResult, HarnessError>)> = stream::iter(suite.iter().enumerate())
        .map(|(i, t)| async move { (i, episode(t, map, model).await) })
        .buffer_unordered(max_in_flight.max(1))
        .collect()
        .await;
    done.sort_by_key(|(i, _)| *i);
    let episodes = done.into_iter().map(|(_, r)| r).collect::<Result<Vec<_>, _>>()?;
    Ok(NavRunResult { summary: summarize(&episodes), episodes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prompt_round_trips() {
        let obs = Observation {
            hint: vec!["Corner Cafe".into(), "City Museum".into()],
            dest_name: "Old Town".into(),
            candidates: vec![
                LaneChoice { road_name: "Birch Ave".into(), direction: Direction::N },
                LaneChoice { road_name: "Elm St".into(), direction: Direction::SE },
            ],
        };
        assert_eq!(parse_nav_prompt(&nav_prompt(&obs)), Some(obs));
    }
}
