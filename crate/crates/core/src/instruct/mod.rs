//! Instruction-tuning data synthesized from the map: single-entity questions
//! (CityQA), route narrations (CityWalk) and explicit distance/direction
//! reasoning chains (CityReasoning).

mod cityqa;
mod citywalk;
mod reasoning;
mod templates;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::SynthError;
use crate::map::{CityMap, EntityKind, NearbyEntity};

pub use cityqa::{gen_cityqa, CityQaConfig, QA_TYPES};
pub use citywalk::{gen_citywalk, render_route_context, CityWalkConfig, OBSERVATION_LIMIT, OBSERVATION_RADIUS_M};
pub use reasoning::{
    direction_chain, distance_chain, gen_cityreasoning, net_displacement, round_to_10, ChainState, ChainStep,
    CityReasoningConfig, ReasoningChain, ReasoningKind, MIN_NET_DISPLACEMENT_M,
};
pub use templates::TemplateSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    CityQa,
    CityWalk,
    CityReasoning,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::CityQa => "cityqa",
            Source::CityWalk => "citywalk",
            Source::CityReasoning => "cityreasoning",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub question_type: String,
    /// Grounding ids: the entity for CityQA, `[origin, dest]` junctions for route samples.
    pub entities: Vec<String>,
    /// Junction sequence of the route, when the sample follows one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub followup_type: Option<String>,
    /// Template index per user turn.
    pub templates: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionSample {
    pub id: String,
    pub source: Source,
    pub messages: Vec<Message>,
    pub meta: SampleMeta,
}

/// Relation class plus ordered ids, used to detect evaluation items that
/// reuse training material.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LeakKey {
    pub relation: String,
    pub ids: Vec<String>,
}

impl InstructionSample {
    pub fn rounds(&self) -> usize {
        self.messages.iter().filter(|m| m.role == Role::User).count()
    }

    /// True when roles alternate starting with the user and every user turn is answered.
    pub fn is_well_formed(&self) -> bool {
        !self.messages.is_empty()
            && self.messages.len().is_multiple_of(2)
            && self
                .messages
                .iter()
                .enumerate()
                .all(|(i, m)| m.role == if i % 2 == 0 { Role::User } else { Role::Assistant })
    }

    pub fn leak_key(&self) -> LeakKey {
        match self.source {
            Source::CityQa => LeakKey { relation: "entity".into(), ids: self.meta.entities.clone() },
            Source::CityWalk | Source::CityReasoning => LeakKey { relation: "route".into(), ids: self.meta.entities.clone() },
        }
    }
}

pub(crate) fn sample_id(source: Source, index: usize) -> String {
    format!("{}-{:07}", source.as_str(), index)
}

/// Human-readable label for a point entity.
pub(crate) fn entity_label(map: &CityMap, e: &NearbyEntity) -> String {
    match e.kind {
        EntityKind::Poi => map.poi(&e.id).map(|p| p.name.clone()).unwrap_or_else(|| e.id.clone()),
        EntityKind::Aoi => map.aoi(&e.id).map(|a| a.name.clone()).unwrap_or_else(|| e.id.clone()),
        EntityKind::Junction => format!("junction {}", e.id),
    }
}

/// Largest-remainder apportionment of `n` items over non-negative weights.
pub(crate) fn apportion(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 || weights.is_empty() {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    for i in order {
        if left == 0 {
            break;
        }
        if weights[i] > 0.0 {
            counts[i] += 1;
            left -= 1;
        }
    }
    counts
}

/// `n` items spread as evenly as possible over `k` buckets, earlier buckets first.
pub fn apportion_counts(n: usize, k: usize) -> Vec<usize> {
    apportion(n, &vec![1.0; k])
}

/// Write samples as JSONL sorted by id.
pub fn export_dataset(samples: &[InstructionSample], path: impl AsRef<Path>) -> Result<usize, SynthError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| SynthError::Io { path: path.to_path_buf(), source })?;
    write_dataset(samples, file).map_err(|source| SynthError::Io { path: path.to_path_buf(), source })?;
    Ok(samples.len())
}

pub fn write_dataset(samples: &[InstructionSample], out: impl Write) -> std::io::Result<()> {
    let mut sorted: Vec<&InstructionSample> = samples.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = BufWriter::new(out);
    for s in sorted {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<InstructionSample>, SynthError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| SynthError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| SynthError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| SynthError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}
