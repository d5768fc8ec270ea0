use std::time::Duration;

use async_trait::async_trait;
use serde_json::{json, Value};

use crate::error::HarnessError;
use crate::instruct::{Message, Role};

use super::{ChatModel, ModelEndpoint};

/// Client for `POST {base_url}/chat/completions`.
pub struct HttpModel {
    endpoint: ModelEndpoint,
    client: reqwest::Client,
}

enum Failure {
    Retry(String),
    Fatal(HarnessError),
}

impl HttpModel {
    pub fn new(endpoint: ModelEndpoint) -> Result<Self, HarnessError> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_millis(endpoint.timeout_ms))
            .build()
            .map_err(|e| HarnessError::Transport(e.to_string()))?;
        Ok(Self { endpoint, client })
    }

    pub fn endpoint(&self) -> &ModelEndpoint {
        &self.endpoint
    }

    fn body(&self, messages: &[Message]) -> Value {
        let msgs: Vec<Value> = messages
            .iter()
            .map(|m| {
                let role = match m.role {
                    Role::User => "user",
                    Role::Assistant => "assistant",
                };
                json!({"role": role, "content": m.content})
            })
            .collect();
        let p = &self.endpoint.params;
        let mut body = json!({
            "model": self.endpoint.model,
            "messages": msgs,
            "temperature": p.temperature,
            "max_tokens": p.max_tokens,
        });
        if p.repetition_penalty != 1.0 {
            body["repetition_penalty"] = json!(p.repetition_penalty);
        }
        body
    }

    async fn attempt(&self, body: &Value) -> Result<String, Failure> {
        let url = format!("{}/chat/completions", self.endpoint.base_url.trim_end_matches('/'));
        let mut req = self.client.post(url).json(body);
        if let Some(key) = &self.endpoint.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().await.map_err(|e| Failure::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.text().await.map_err(|e| Failure::Retry(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(Failure::Retry(format!("HTTP {status}: {text}")));
        }
        if !(200..300).contains(&status) {
            return Err(Failure::Fatal(HarnessError::Status { status, body: text }));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Fatal(HarnessError::MalformedResponse(e.to_string())))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Failure::Fatal(HarnessError::MalformedResponse("missing choices[0].message.content".into())))
    }

    /// Send one request, retrying transport errors, 429 and 5xx with exponential backoff.
    pub async fn query(&self, messages: &[Message]) -> Result<String, HarnessError> {
        let body = self.body(messages);
        let attempts = self.endpoint.retries + 1;
        let mut last = String::new();
        for k in 0..attempts {
            if k > 0 {
                let wait = self.endpoint.backoff_ms.saturating_mul(1 << (k - 1).min(16));
                tokio::time::sleep(Duration::from_millis(wait)).await;
            }
            match self.attempt(&body).await {
                Ok(text) => return Ok(text),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retry(msg)) => {
                    log::warn!("request to {} failed (attempt {}/{attempts}): {msg}", self.endpoint.base_url, k + 1);
                    last = msg;
                }
            }
        }
        Err(HarnessError::RetriesExhausted { attempts, last })
    }
}

#[async_trait]
impl ChatModel for HttpModel {
    fn name(&self) -> &str {
        &self.endpoint.model
    }

    async fn complete(&self, messages: &[Message]) -> Result<String, HarnessError> {
        self.query(messages).await
    }
}
