use std::collections::HashSet;

use futures::stream::{self, StreamExt};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::eval::{EvalQuestion, Group, LABELS};
use crate::instruct::Message;
use crate::seed::rng_for;

use super::extract::extract_choice;
use super::{ChatModel, DecodingParams};

pub const ANSWER_INSTRUCTION: &str = "Answer with the letter of the correct option.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub params: DecodingParams,
    pub shots: usize,
    pub seed: u64,
    pub max_in_flight: usize,
}

impl Default for BenchmarkRun {
    fn default() -> Self {
        Self { params: DecodingParams::default(), shots: 0, seed: 0, max_in_flight: 4 }
    }
}

/// What a result was produced with. Concurrency is left out on purpose so
/// runs at different parallelism compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub model: String,
    pub params: DecodingParams,
    pub shots: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub question_id: String,
    pub task: String,
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub extracted: Option<usize>,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScore {
    pub group: Group,
    pub task: String,
    pub n: usize,
    pub correct: usize,
    pub abstained: usize,
    pub wrong: usize,
    pub accuracy: f64,
    pub abstain_rate: f64,
    pub wrong_rate: f64,
}

/// Group accuracy is the mean of its task accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupScore {
    pub group: Group,
    pub tasks: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub config: ConfigSnapshot,
    pub per_task: Vec<TaskScore>,
    pub per_group: Vec<GroupScore>,
    pub transcripts: Vec<Transcript>,
}

impl EvalResult {
    pub fn group_accuracy(&self, group: Group) -> Option<f64> {
        self.per_group.iter().find(|g| g.group == group).map(|g| g.accuracy)
    }
}

/// Chat messages for one question: each exemplar as a solved user/assistant
/// exchange, then the question itself.
pub fn render_prompt(question: &EvalQuestion, exemplars: &[&EvalQuestion]) -> Vec<Message> {
    let mut msgs = Vec::with_capacity(exemplars.len() * 2 + 1);
    for e in exemplars {
        msgs.push(Message::user(format!("{}\n{ANSWER_INSTRUCTION}", e.render())));
        msgs.push(Message::assistant(format!("The answer is {}.", LABELS[e.answer])));
    }
    msgs.push(Message::user(format!("{}\n{ANSWER_INSTRUCTION}", question.render())));
    msgs
}

/// Drop pool entries that share an id or a stem with any evaluated question.
pub fn disjoint_pool(pool: Vec<EvalQuestion>, questions: &[EvalQuestion]) -> Vec<EvalQuestion> {
    let ids: HashSet<&str> = questions.iter().map(|q| q.id.as_str()).collect();
    let stems: HashSet<&str> = questions.iter().map(|q| q.question.as_str()).collect();
    pool.into_iter().filter(|e| !ids.contains(e.id.as_str()) && !stems.contains(e.question.as_str())).collect()
}

fn check_disjoint(questions: &[EvalQuestion], pool: &[EvalQuestion]) -> Result<(), HarnessError> {
    let ids: HashSet<&str> = questions.iter().map(|q| q.id.as_str()).collect();
    let stems: HashSet<&str> = questions.iter().map(|q| q.question.as_str()).collect();
    match pool.iter().find(|e| ids.contains(e.id.as_str()) || stems.contains(e.question.as_str())) {
        Some(e) => Err(HarnessError::ExemplarOverlap(e.id.clone())),
        None => Ok(()),
    }
}

/// Exemplars for question `index`: same task first, then same group, then anything.
fn pick_exemplars<'a>(q: &EvalQuestion, index: usize, pool: &'a [EvalQuestion], shots: usize, seed: u64) -> Vec<&'a EvalQuestion> {
    let mut rng = rng_for(seed, "exemplars", index as u64);
    let mut tiers: [Vec<&EvalQuestion>; 3] = Default::default();
    for e in pool {
        let tier = if e.task == q.task {
            0
        } else if e.group == q.group {
            1
        } else {
            2
        };
        tiers[tier].push(e);
    }
    let mut out = Vec::with_capacity(shots);
    for mut tier in tiers {
        tier.shuffle(&mut rng);
        out.extend(tier.into_iter().take(shots - out.len()));
    }
    out
}

pub async fn run_benchmark(
    questions: &[EvalQuestion],
    exemplar_pool: &[EvalQuestion],
    model: &dyn ChatModel,
    run: &BenchmarkRun,
) -> Result<EvalResult, HarnessError> {
    if run.shots > 0 {
        check_disjoint(questions, exemplar_pool)?;
        if exemplar_pool.len() < run.shots {
            return Err(HarnessError::Invalid(format!(
                "{}-shot run needs {} exemplars, pool has {}",
                run.shots,
                run.shots,
                exemplar_pool.len()
            )));
        }
    }
    let prompts: Vec<Vec<Message>> = questions
        .iter()
        .enumerate()
        .map(|(i, q)| render_prompt(q, &pick_exemplars(q, i, exemplar_pool, run.shots, run.seed)))
        .collect();

    let mut answers: Vec<(usize, Result<String, HarnessError>)> = stream::iter(prompts.iter().enumerate())
        .map(|(i, msgs)| async move { (i, model.complete(msgs).await) })
        .buffer_unordered(run.max_in_flight.max(1))
        .collect()
        .await;
    answers.sort_by_key(|(i, _)| *i);

    let transcripts: Vec<Transcript> = answers
        .into_iter()
        .map(|(i, answer)| {
            let q = &questions[i];
            let (response, error) = match answer {
                Ok(text) => (Some(text), None),
                Err(e) => {
                    log::warn!("question {}: {e}", q.id);
                    (None, Some(e.to_string()))
                }
            };
            let extracted = response.as_deref().and_then(|r| extract_choice(r, &q.choices));
            Transcript {
                question_id: q.id.clone(),
                task: q.task.clone(),
                correct: extracted == Some(q.answer),
                response,
                error,
                extracted,
            }
        })
        .collect();

    let (per_task, per_group) = score(questions, &transcripts);
    Ok(EvalResult {
        config: ConfigSnapshot { model: model.name().to_string(), params: run.params.clone(), shots: run.shots, seed: run.seed },
        per_task,
        per_group,
        transcripts,
    })
}

fn score(questions: &[EvalQuestion], transcripts: &[Transcript]) -> (Vec<TaskScore>, Vec<GroupScore>) {
    let mut per_task: Vec<TaskScore> = Vec::new();
    for (q, t) in questions.iter().zip(transcripts) {
        let pos = match per_task.iter().position(|s| s.group == q.group && s.task == q.task) {
            Some(p) => p,
            None => {
                per_task.push(TaskScore {
                    group: q.group,
                    task: q.task.clone(),
                    n: 0,
                    correct: 0,
                    abstained: 0,
                    wrong: 0,
                    accuracy: 0.0,
                    abstain_rate: 0.0,
                    wrong_rate: 0.0,
                });
                per_task.len() - 1
            }
        };
        let s = &mut per_task[pos];
        s.n += 1;
        match (t.extracted, t.correct) {
            (_, true) => s.correct += 1,
            (None, _) => s.abstained += 1,
            _ => s.wrong += 1,
        }
    }
    for s in &mut per_task {
        let n = s.n as f64;
        s.accuracy = s.correct as f64 / n;
        s.abstain_rate = s.abstained as f64 / n;
        s.wrong_rate = s.wrong as f64 / n;
    }
    let per_group = Group::ALL
        .into_iter()
        .filter_map(|g| {
            let accs: Vec<f64> = per_task.iter().filter(|s| s.group == g).map(|s| s.accuracy).collect();
            (!accs.is_empty()).then(|| GroupScore { group: g, tasks: accs.len(), accuracy: accs.iter().sum::<f64>() / accs.len() as f64 })
        })
        .collect();
    (per_task, per_group)
}
