use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("coordinate out of range: lon={lon}, lat={lat}")]
    OutOfRange { lon: f64, lat: f64 },
    #[error("bearing undefined for coincident points")]
    CoincidentPoints,
    #[error("unknown compass direction {0:?}")]
    UnknownDirection(String),
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: invalid field `{field}`: {message}")]
    InvalidField { line: usize, field: &'static str, message: String },
    #[error("line {line}: duplicate {kind} id {id:?}")]
    DuplicateId { line: usize, kind: &'static str, id: String },
    #[error("line {line}: {kind} {id:?} references unknown {target_kind} {target:?}")]
    DanglingReference { line: usize, kind: &'static str, id: String, target_kind: &'static str, target: String },
    #[error("junction {0:?} has no incident roads")]
    IsolatedJunction(String),
    #[error("map has no road segments")]
    EmptyRoadNetwork,
    #[error("requested {requested} nearest PoIs but the map has {available}")]
    NotEnoughPois { requested: usize, available: usize },
    #[error("unknown {kind} id {id:?}")]
    UnknownEntity { kind: &'static str, id: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RouteError {
    #[error("unknown junction {0:?}")]
    UnknownJunction(String),
    #[error("no route from {origin:?} to {dest:?}")]
    Unreachable { origin: String, dest: String },
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("map has no entities of kind {0}")]
    MissingEntities(&'static str),
    #[error("no template registered for question type {0:?}")]
    MissingTemplates(String),
    #[error("template for {question_type:?} uses unknown slot {{{slot}}}")]
    UnknownSlot { question_type: String, slot: String },
    #[error("question type {question_type:?} has {count} templates, at least 3 are required")]
    TooFewTemplates { question_type: String, count: usize },
    #[error("no origin/destination pair within [{min_m}, {max_m}] m after {attempts} attempts")]
    NoOdPair { min_m: f64, max_m: f64, attempts: usize },
    #[error("road network needs at least 2 connected junctions")]
    GraphTooSmall,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("need {needed} distinct distractors, pool has {available}")]
    InsufficientDistractors { needed: usize, available: usize },
    #[error("choice count {0} outside 4..=10")]
    ChoiceCount(usize),
    #[error("task {task}: could not build {wanted} questions ({built} built): {reason}")]
    InsufficientEntities { task: String, wanted: usize, built: usize, reason: String },
    #[error("invalid benchmark spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Error)]
pub enum NavError {
    #[error("AoI {0:?} has no junction within reach")]
    NoNearbyJunction(String),
    #[error("episode already finished")]
    EpisodeDone,
    #[error("unknown AoI {0:?}")]
    UnknownAoi(String),
    #[error("destination of task {0:?} is unreachable")]
    Unreachable(String),
    #[error("map too small for the requested suite: {0}")]
    MapTooSmall(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("request failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: usize, last: String },
    #[error("malformed response body: {0}")]
    MalformedResponse(String),
    #[error("histograms have different bin counts ({0} vs {1})")]
    BinMismatch(usize, usize),
    #[error("histogram has a negative or non-finite entry")]
    InvalidHistogram,
    #[error("histogram is empty")]
    EmptyHistogram,
    #[error("trajectory {subject:?} is too short ({visits} visits)")]
    TrajectoryTooShort { subject: String, visits: usize },
    #[error("trajectory {0:?} has non-increasing timestamps")]
    NonMonotonicTrajectory(String),
    #[error("exemplar pool overlaps the evaluated questions ({0:?})")]
    ExemplarOverlap(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Nav(#[from] NavError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Error)]
pub enum SwftError {
    #[error("no loss records")]
    Empty,
    #[error("base-loss vector has zero norm")]
    ZeroBaseNorm,
    #[error("record {id:?}: loss must be finite and non-negative")]
    InvalidLoss { id: String },
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("no weight for sample {0:?}")]
    MissingWeight(String),
    #[error("sample ids do not line up: {0}")]
    IdMismatch(String),
    #[error("quantile {0} outside [0, 1]")]
    BadQuantile(f64),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
