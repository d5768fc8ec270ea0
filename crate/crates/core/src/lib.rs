//! Toolkit for grounding language models in a city's geography: a map
//! model with routing, generators for instruction data and a multiple-choice
//! benchmark, a street-navigation environment, an evaluation harness for
//! chat-completion endpoints, and loss-based sample reweighting.

pub mod error;
pub mod eval;
pub mod geo;
pub mod harness;
pub mod instruct;
pub mod map;
pub mod nav;
pub mod routing;
pub mod seed;
pub mod swft;

pub use error::{BenchError, GeoError, HarnessError, MapError, NavError, RouteError, SwftError, SynthError};
pub use geo::{Direction, GeoPoint};
pub use map::{CityMap, EntityKind};
pub use routing::{RoadGraph, Route, RouteStep};
pub use swft::{LossRecord, SampleWeight};
