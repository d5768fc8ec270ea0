//! Drives chat-completion endpoints through the benchmark and the composite
//! tasks (mobility prediction, trajectory generation, navigation) and scores
//! the answers.

mod benchmark;
mod client;
mod extract;
mod metrics;
mod mobility;
pub mod mock;
mod navigation;
mod report;
mod synthetic;
mod trajectory;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;
use crate::instruct::Message;

pub use benchmark::{
    disjoint_pool, render_prompt, run_benchmark, BenchmarkRun, ConfigSnapshot, EvalResult, GroupScore, TaskScore, Transcript,
    ANSWER_INSTRUCTION,
};
pub use client::HttpModel;
pub use extract::{extract_choice, normalize_name};
pub use metrics::{
    daily_locations, histogram, jsd, radius_of_gyration, step_distances, BinScheme, DAILY_LOC_BINS, DISTANCE_BINS,
    JSD_EPSILON, RADIUS_BINS,
};
pub use mobility::{mobility_prompts, read_trajectories, run_mobility_prediction, MobilityItem, MobilityResult, MobilityTranscript, TrajectoryRecord, Visit};
pub use navigation::{nav_prompt, parse_nav_prompt, run_navigation, NavRunResult};
pub use report::{report_csv, summary_csv};
pub use synthetic::{agendas_for, synthetic_trajectories};
pub use trajectory::{read_agendas, run_trajectory_generation, trajectory_prompt, Agenda, AgendaItem, TrajectoryGenResult};

/// Sampling parameters sent with every request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub repetition_penalty: f64,
}

impl Default for DecodingParams {
    fn default() -> Self {
        Self { temperature: 0.0, max_tokens: 500, repetition_penalty: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelEndpoint {
    pub base_url: String,
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    pub params: DecodingParams,
    pub max_in_flight: usize,
    pub timeout_ms: u64,
    pub retries: usize,
    pub backoff_ms: u64,
}

impl Default for ModelEndpoint {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            api_key: None,
            params: DecodingParams::default(),
            max_in_flight: 4,
            timeout_ms: 60_000,
            retries: 3,
            backoff_ms: 500,
        }
    }
}

/// Anything that answers a chat transcript with one assistant message.
#[async_trait]
pub trait ChatModel: Send + Sync {
    fn name(&self) -> &str;

    async fn complete(&self, messages: &[Message]) -> Result<String, HarnessError>;
}
