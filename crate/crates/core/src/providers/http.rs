use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{ChatRequest, ChatResponse, Provider, ProviderError};

/// Environment variable holding the bearer token.
pub const API_KEY_ENV: &str = "EVOVERIF_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpProviderConfig {
    /// Full chat-completions URL, e.g. `https://host/v1/chat/completions`.
    pub endpoint: String,
    pub model: String,
    #[serde(skip_serializing)]
    pub api_key: Option<String>,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub request_timeout_secs: u64,
}

impl Default for HttpProviderConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: String::new(),
            api_key: None,
            temperature: 1.0,
            max_tokens: None,
            max_attempts: 3,
            backoff_base_ms: 1000,
            request_timeout_secs: 600,
        }
    }
}

/// Chat-completions client (one user message per request, bearer auth).
///
/// Retries transport errors, HTTP 5xx and 429 with exponential backoff; any
/// other status fails immediately.
pub struct HttpProvider {
    config: HttpProviderConfig,
    agent: ureq::Agent,
}

impl HttpProvider {
    /// `EVOVERIF_API_KEY`, when set, overrides `config.api_key`.
    pub fn new(mut config: HttpProviderConfig) -> Self {
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            if !key.is_empty() {
                config.api_key = Some(key);
            }
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.request_timeout_secs)))
            .build()
            .into();
        Self { config, agent }
    }

    pub fn config(&self) -> &HttpProviderConfig {
        &self.config
    }

    fn body(&self, request: &ChatRequest) -> Value {
        let model = if request.model.is_empty() {
            &self.config.model
        } else {
            &request.model
        };
        let mut body = json!({
            "model": model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
        });
        if let Some(max) = request.max_tokens.or(self.config.max_tokens) {
            body["max_tokens"] = json!(max);
        }
        body
    }

    fn attempt(&self, body: &Value) -> Attempt {
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = resp.status().as_u16();
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        if status == 429 || status >= 500 {
            return Attempt::Retry(format!("HTTP {status}: {text}"));
        }
        if !(200..300).contains(&status) {
            return Attempt::Fail(ProviderError::Status { status, body: text });
        }
        match parse_reply(&text) {
            Ok(r) => Attempt::Done(r),
            Err(e) => Attempt::Fail(e),
        }
    }
}

enum Attempt {
    Done(ChatResponse),
    Retry(String),
    Fail(ProviderError),
}

fn parse_reply(text: &str) -> Result<ChatResponse, ProviderError> {
    let v: Value = serde_json::from_str(text).map_err(|e| ProviderError::Malformed(e.to_string()))?;
    let content = v
        .pointer("/choices/0/message/content")
        .ok_or_else(|| ProviderError::Malformed("missing choices[0].message.content".into()))?;
    let content = match content {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => return Err(ProviderError::Malformed(format!("content is not a string: {other}"))),
    };
    let usage = |key: &str| v.pointer(&format!("/usage/{key}")).and_then(Value::as_u64).unwrap_or(0);
    Ok(ChatResponse {
        text: content,
        prompt_tokens: usage("prompt_tokens"),
        completion_tokens: usage("completion_tokens"),
        latency_ms: 0,
    })
}

impl Provider for HttpProvider {
    fn send(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let body = self.body(request);
        let attempts = self.config.max_attempts.max(1);
        let start = Instant::now();
        let mut last = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                let delay = self.config.backoff_base_ms.saturating_mul(1 << (attempt - 1).min(16));
                std::thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(&body) {
                Attempt::Done(mut r) => {
                    r.latency_ms = start.elapsed().as_millis() as u64;
                    return Ok(r);
                }
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(msg) => {
                    log::warn!("{} attempt {} failed: {msg}", request.phase, attempt + 1);
                    last = msg;
                }
            }
        }
        Err(ProviderError::Transport {
            attempts,
            message: last,
        })
    }

    fn model(&self) -> &str {
        &self.config.model
    }
}
