//! Completion backends.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::prompt::ExtractionTask;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("request timed out")]
    Timeout,
    #[error("unexpected response: {0}")]
    Protocol(String),
}

/// Sampling and transport settings for one completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub temperature: f64,
    pub repetition_penalty: f64,
    pub max_tokens: u32,
    pub model: String,
    pub endpoint: String,
    pub timeout_secs: f64,
    /// Retries after the first attempt, per task.
    pub retries: u32,
    /// Append the `/no_think` marker to every prompt.
    pub suppress_reasoning: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            temperature: 0.5,
            repetition_penalty: 1.01,
            max_tokens: 2048,
            model: "qwen3-0.6b".to_string(),
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".to_string(),
            timeout_secs: 30.0,
            retries: 2,
            suppress_reasoning: false,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if !(self.repetition_penalty.is_finite() && self.repetition_penalty >= 1.0) {
            return Err(format!("repetition_penalty must be >= 1, got {}", self.repetition_penalty));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(format!("timeout_secs must be > 0, got {}", self.timeout_secs));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

/// An opaque text-completion service. Implementations must tolerate
/// concurrent calls: the three sub-tasks of one resume are issued at once.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, prompt: &str, config: &DecodeConfig) -> Result<String, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &B {
    fn complete(&self, prompt: &str, config: &DecodeConfig) -> Result<String, BackendError> {
        (**self).complete(prompt, config)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&self, prompt: &str, config: &DecodeConfig) -> Result<String, BackendError> {
        (**self).complete(prompt, config)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<B> {
    fn complete(&self, prompt: &str, config: &DecodeConfig) -> Result<String, BackendError> {
        (**self).complete(prompt, config)
    }
}

/// Request body for a chat-completions style endpoint.
pub fn chat_request_body(prompt: &str, config: &DecodeConfig) -> Value {
    json!({
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": config.temperature,
        "repetition_penalty": config.repetition_penalty,
        "max_tokens": config.max_tokens,
    })
}

/// Text of the first choice; accepts both chat (`message.content`) and
/// legacy completion (`text`) shapes.
pub fn first_choice_text(body: &Value) -> Result<String, BackendError> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| BackendError::Protocol("response has no choices".into()))?;
    choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::Protocol("first choice carries no text".into()))
}

/// Blocking HTTP client for OpenAI-compatible chat-completions servers.
pub struct HttpBackend {
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(true)
            .build()
            .into();
        HttpBackend { agent, api_key: None }
    }

    pub fn with_api_key(mut self, key: impl Into<String>) -> Self {
        self.api_key = Some(key.into());
        self
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, prompt: &str, config: &DecodeConfig) -> Result<String, BackendError> {
        let mut request = self.agent.post(&config.endpoint).header("content-type", "application/json");
        if let Some(key) = &self.api_key {
            request = request.header("authorization", format!("Bearer {key}"));
        }
        let mut response = request.send_json(chat_request_body(prompt, config)).map_err(|e| match e {
            ureq::Error::Timeout(_) => BackendError::Timeout,
            other => BackendError::Transport(other.to_string()),
        })?;
        let body: Value = response.body_mut().read_json().map_err(|e| BackendError::Protocol(e.to_string()))?;
        first_choice_text(&body)
    }
}

/// Canned responses keyed by task.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    responses: HashMap<ExtractionTask, String>,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, task: ExtractionTask, raw: impl Into<String>) -> Self {
        self.responses.insert(task, raw.into());
        self
    }

    /// Builds a table from a JSON object keyed by task (`basicInfo`,
    /// `education`, `workExperience`). String values are used verbatim as
    /// raw model output; any other JSON value is serialized.
    pub fn from_json(value: &Value) -> Result<Self, BackendError> {
        let obj = value.as_object().ok_or_else(|| BackendError::Protocol("mock table must be a JSON object".into()))?;
        let mut mock = MockBackend::new();
        for task in ExtractionTask::ALL {
            if let Some(v) = obj.get(task.key()) {
                let raw = match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                mock.responses.insert(task, raw);
            }
        }
        Ok(mock)
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::Transport(e.to_string()))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| BackendError::Protocol(e.to_string()))?;
        Self::from_json(&value)
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, prompt: &str, _config: &DecodeConfig) -> Result<String, BackendError> {
        let task = ExtractionTask::from_prompt(prompt)
            .ok_or_else(|| BackendError::Protocol("prompt matches no known task".into()))?;
        Ok(self.responses.get(&task).cloned().unwrap_or_default())
    }
}
