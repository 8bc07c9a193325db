//! Chat-completions HTTP backend.

use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{ChatBackend, ChatRequest, ChatResponse, LlmError, Usage};
use crate::sync::Semaphore;

pub const ENV_API_BASE: &str = "OPTITREE_API_BASE";
pub const ENV_API_KEY: &str = "OPTITREE_API_KEY";
pub const ENV_MODEL: &str = "OPTITREE_MODEL";

#[derive(Debug, Clone, PartialEq)]
pub struct LiveConfig {
    /// Base URL; `/chat/completions` is appended.
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub request_timeout: Duration,
    /// Total attempts for transport failures, including the first.
    pub max_attempts: u32,
    /// First backoff delay; doubles after every failed attempt.
    pub backoff: Duration,
    pub max_in_flight: usize,
}

impl LiveConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            api_key: None,
            model: model.into(),
            request_timeout: Duration::from_secs(120),
            max_attempts: 3,
            backoff: Duration::from_millis(500),
            max_in_flight: 4,
        }
    }

    /// Reads `OPTITREE_API_BASE`, `OPTITREE_API_KEY` and `OPTITREE_MODEL`.
    pub fn from_env() -> Result<Self, LlmError> {
        let base = std::env::var(ENV_API_BASE)
            .map_err(|_| LlmError::BackendUnavailable(format!("{ENV_API_BASE} is not set")))?;
        let model = std::env::var(ENV_MODEL)
            .map_err(|_| LlmError::BackendUnavailable(format!("{ENV_MODEL} is not set")))?;
        let mut cfg = Self::new(base, model);
        cfg.api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        Ok(cfg)
    }
}

#[derive(Debug)]
pub struct LiveBackend {
    config: LiveConfig,
    client: reqwest::blocking::Client,
    in_flight: Semaphore,
}

enum Attempt {
    Retry(LlmError),
    Fatal(LlmError),
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| LlmError::BackendUnavailable(e.to_string()))?;
        let in_flight = Semaphore::new(config.max_in_flight);
        Ok(Self {
            config,
            client,
            in_flight,
        })
    }

    pub fn config(&self) -> &LiveConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn attempt(&self, body: &Value) -> Result<(String, Usage), Attempt> {
        let mut req = self.client.post(self.endpoint()).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| {
            if e.is_timeout() {
                Attempt::Retry(LlmError::Timeout)
            } else {
                Attempt::Retry(LlmError::BackendUnavailable(e.to_string()))
            }
        })?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(LlmError::BackendUnavailable(format!(
                "HTTP {status}"
            ))));
        }
        if !status.is_success() {
            let detail = resp.text().unwrap_or_default();
            return Err(Attempt::Fatal(LlmError::BackendUnavailable(format!(
                "HTTP {status}: {detail}"
            ))));
        }
        let payload: Value = resp
            .json()
            .map_err(|e| Attempt::Retry(LlmError::BackendUnavailable(format!("bad body: {e}"))))?;
        let text = payload["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| {
                Attempt::Fatal(LlmError::BackendUnavailable(
                    "response has no message content".into(),
                ))
            })?
            .to_string();
        let usage = Usage {
            prompt_tokens: payload["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: payload["usage"]["completion_tokens"].as_u64().unwrap_or(0),
        };
        Ok((text, usage))
    }
}

impl ChatBackend for LiveBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let prompt = request.render()?;
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let _permit = self.in_flight.acquire();
        let started = Instant::now();
        let mut delay = self.config.backoff;
        let attempts = self.config.max_attempts.max(1);
        let mut last = LlmError::BackendUnavailable("no attempt made".into());
        for i in 0..attempts {
            match self.attempt(&body) {
                Ok((text, usage)) => {
                    return Ok(ChatResponse {
                        text,
                        usage,
                        latency: started.elapsed().as_secs_f64(),
                    })
                }
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(e)) => {
                    log::warn!("chat attempt {} of {attempts} failed: {e}", i + 1);
                    last = e;
                    if i + 1 < attempts {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(match last {
            LlmError::Timeout => LlmError::Timeout,
            e => LlmError::BackendUnavailable(format!("after {attempts} attempts: {e}")),
        })
    }
}
