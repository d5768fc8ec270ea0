use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use async_trait::async_trait;
use urbanscope::harness::mock::{FixedModel, RandomChoiceModel};
use urbanscope::harness::{ChatModel, HttpModel, ModelEndpoint};
use urbanscope::instruct::Message;
use urbanscope::HarnessError;

use crate::error::CliError;

/// What `endpoint.base_url` selects. `mock://` URLs run deterministic
/// in-process models instead of contacting a server.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelChoice {
    Http(ModelEndpoint),
    /// Knows every answer of the artifacts it is given.
    EchoTruth,
    Fixed(String),
    Random(u64),
    /// Shortest-path agent for navigation; same as echo-truth elsewhere.
    Oracle,
}

impl ModelChoice {
    pub fn from_endpoint(ep: &ModelEndpoint) -> Result<Self, CliError> {
        let Some(rest) = ep.base_url.strip_prefix("mock://") else {
            if !(ep.base_url.starts_with("http://") || ep.base_url.starts_with("https://")) {
                return Err(CliError::Config(format!("endpoint.base_url: expected http(s):// or mock://, got {:?}", ep.base_url)));
            }
            return Ok(ModelChoice::Http(ep.clone()));
        };
        let (kind, arg) = rest.split_once('/').unwrap_or((rest, ""));
        match kind {
            "echo-truth" => Ok(ModelChoice::EchoTruth),
            "oracle" => Ok(ModelChoice::Oracle),
            "fixed" if !arg.is_empty() => Ok(ModelChoice::Fixed(arg.to_string())),
            "random" => arg
                .parse()
                .map(ModelChoice::Random)
                .map_err(|_| CliError::Config(format!("endpoint.base_url: mock://random/<seed> needs an integer seed, got {arg:?}"))),
            _ => Err(CliError::Config(format!(
                "endpoint.base_url: unknown mock {rest:?} (use echo-truth, oracle, fixed/<reply> or random/<seed>)"
            ))),
        }
    }

    /// Models that need no knowledge of the task data.
    pub fn generic(&self) -> Result<Option<Box<dyn ChatModel>>, CliError> {
        Ok(match self {
            ModelChoice::Http(ep) => Some(Box::new(HttpModel::new(ep.clone())?)),
            ModelChoice::Fixed(r) => Some(Box::new(FixedModel::new(r.clone()))),
            ModelChoice::Random(s) => Some(Box::new(RandomChoiceModel::new(*s))),
            ModelChoice::EchoTruth | ModelChoice::Oracle => None,
        })
    }
}

/// Counts answered and failed calls so a run where nothing got through can
/// be reported as an endpoint failure.
pub struct Counted<'a> {
    inner: &'a dyn ChatModel,
    ok: AtomicUsize,
    failed: AtomicUsize,
    last_error: Mutex<Option<String>>,
}

impl<'a> Counted<'a> {
    pub fn new(inner: &'a dyn ChatModel) -> Self {
        Self { inner, ok: AtomicUsize::new(0), failed: AtomicUsize::new(0), last_error: Mutex::new(None) }
    }

    pub fn failed(&self) -> usize {
        self.failed.load(Ordering::Relaxed)
    }

    /// Error when requests were made and none succeeded.
    pub fn check(&self) -> Result<(), CliError> {
        let (ok, failed) = (self.ok.load(Ordering::Relaxed), self.failed());
        if ok == 0 && failed > 0 {
            let last = self.last_error.lock().unwrap().clone().unwrap_or_default();
            return Err(CliError::Endpoint(format!("all {failed} requests failed; last error: {last}")));
        }
        if failed > 0 {
            log::warn!("{failed} of {} requests failed and were scored as abstentions", ok + failed);
        }
        Ok(())
    }
}

#[async_trait]
impl ChatModel for Counted<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    async fn complete(&self, messages: &[Message]) -> Result<String, HarnessError> {
        let r = self.inner.complete(messages).await;
        match &r {
            Ok(_) => self.ok.fetch_add(1, Ordering::Relaxed),
            Err(e) => {
                *self.last_error.lock().unwrap() = Some(e.to_string());
                self.failed.fetch_add(1, Ordering::Relaxed)
            }
        };
        r
    }
}
