//! Offline stand-ins for a served model, used by tests and `mock://` endpoints.

use std::collections::HashMap;

use async_trait::async_trait;

use crate::error::{HarnessError, NavError};
use crate::eval::{EvalQuestion, LABELS};
use crate::instruct::{Message, Role};
use crate::map::CityMap;
use crate::nav::{oracle_agent, Goal, LaneChoice, NavState, NavTask, Observation};
use crate::routing::RoadGraph;
use crate::seed::sub_seed;

use super::benchmark::render_prompt;
use super::mobility::MobilityItem;
use super::navigation::{nav_prompt, parse_nav_prompt};
use super::ChatModel;

fn last_user(messages: &[Message]) -> &str {
    messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.content.as_str()).unwrap_or("")
}

/// Answers prompts it has a stored reply for, and gives `fallback` otherwise.
#[derive(Debug, Clone, Default)]
pub struct LookupModel {
    name: String,
    replies: HashMap<String, String>,
    fallback: String,
}

impl LookupModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Self::default() }
    }

    /// Replies with the correct letter for every question.
    pub fn echo_truth(questions: &[EvalQuestion]) -> Self {
        let mut m = Self::new("echo-truth");
        m.add_questions(questions);
        m
    }

    pub fn add_questions(&mut self, questions: &[EvalQuestion]) {
        for q in questions {
            let prompt = render_prompt(q, &[]).pop().map(|m| m.content).unwrap_or_default();
            self.replies.insert(prompt, format!("The answer is {}.", LABELS[q.answer]));
        }
    }

    pub fn add_mobility(&mut self, items: &[MobilityItem]) {
        for it in items {
            self.replies.insert(it.prompt_multi.clone(), format!("The answer is {}.", LABELS[it.answer]));
            self.replies.insert(it.prompt_gen.clone(), it.target_name.clone());
        }
    }

    pub fn insert(&mut self, prompt: impl Into<String>, reply: impl Into<String>) {
        self.replies.insert(prompt.into(), reply.into());
    }

    pub fn with_fallback(mut self, fallback: impl Into<String>) -> Self {
        self.fallback = fallback.into();
        self
    }
}

#[async_trait]
impl ChatModel for LookupModel {
    fn name(&self) -> &str {
        &self.name
    }

    async fn complete(&self, messages: &[Message]) -> Result<String, HarnessError> {
        Ok(self.replies.get(last_user(messages)).cloned().unwrap_or_else(|| self.fallback.clone()))
    }
}

/// Always gives the same reply.
#[derive(Debug, Clone)]
pub struct FixedModel {
    name: String,
    reply: String,
}

impl FixedModel {
    pub fn new(reply: impl Into<String>) -> Self {
        let reply = reply.into();
        Self { name: format!("fixed-{reply}"), reply }
    }
}

#[async_trait]
impl ChatModel for FixedModel {
    fn name(&self) -> &str {
        &self.name
    }

    async fn complete(&self, _messages: &[Message]) -> Result<String, HarnessError> {
        Ok(self.reply.clone())
    }
}

/// Picks one of the labeled options uniformly, as a function of the prompt
/// text and seed, so results do not depend on request order.
#[derive(Debug, Clone)]
pub struct RandomChoiceModel {
    name: String,
    seed: u64,
}

impl RandomChoiceModel {
    pub fn new(seed: u64) -> Self {
        Self { name: format!("random-{seed}"), seed }
    }
}

fn option_count(prompt: &str) -> usize {
    let mut n = 0;
    for line in prompt.lines() {
        if n < LABELS.len() && line.starts_with(&format!("{}. ", LABELS[n])) {
            n += 1;
        }
    }
    n
}

#[async_trait]
impl ChatModel for RandomChoiceModel {
    fn name(&self) -> &str {
        &self.name
    }

    async fn complete(&self, messages: &[Message]) -> Result<String, HarnessError> {
        let prompt = last_user(messages);
        let n = option_count(prompt);
        if n == 0 {
            return Ok(String::new());
        }
        let pick = (sub_seed(self.seed, prompt, 0) % n as u64) as usize;
        Ok(LABELS[pick].to_string())
    }
}

type NavKey = (String, Vec<String>, Vec<LaneChoice>);

/// Navigation agent that recognizes its junction from the prompt and answers
/// with the oracle's lane.
#[derive(Debug, Clone, Default)]
pub struct NavOracleModel {
    choices: HashMap<NavKey, LaneChoice>,
}

impl NavOracleModel {
    pub fn new(suite: &[NavTask], map: &CityMap, graph: &RoadGraph) -> Result<Self, NavError> {
        let mut choices = HashMap::new();
        let mut seen_dest = std::collections::HashSet::new();
        for task in suite {
            if !seen_dest.insert(task.dest.clone()) {
                continue;
            }
            let goal = Goal::new(task, map, graph)?;
            for j in map.junctions() {
                let state = NavState {
                    junction: j.id.clone(),
                    position: j.location,
                    steps_taken: 0,
                    invalid_actions: 0,
                    done: false,
                    success: false,
                };
                let obs = match crate::nav::observe(&state, task, map) {
                    Ok(o) => o,
                    Err(_) => continue,
                };
                let Some(choice) = oracle_agent(&obs, &state, map, graph, &goal) else { continue };
                // round-trip through the prompt so keys match what the model sees
                let Some(parsed) = parse_nav_prompt(&nav_prompt(&obs)) else { continue };
                choices.entry((parsed.dest_name, parsed.hint, parsed.candidates)).or_insert(choice);
            }
        }
        Ok(Self { choices })
    }

    fn answer(&self, obs: &Observation) -> Option<usize> {
        let key = (obs.dest_name.clone(), obs.hint.clone(), obs.candidates.clone());
        let choice = self.choices.get(&key)?;
        obs.candidates.iter().position(|c| c == choice)
    }
}

#[async_trait]
impl ChatModel for NavOracleModel {
    fn name(&self) -> &str {
        "nav-oracle"
    }

    async fn complete(&self, messages: &[Message]) -> Result<String, HarnessError> {
        let reply = parse_nav_prompt(last_user(messages)).and_then(|obs| self.answer(&obs));
        Ok(reply.map(|i| LABELS[i].to_string()).unwrap_or_default())
    }
}
