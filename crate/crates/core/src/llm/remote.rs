//! OpenAI-compatible chat-completions client.

use std::time::Duration;

use rand::Rng;
use serde_json::{json, Value};

use super::{BackendError, CompletionRequest, LlmBackend};

pub const ENV_API_KEY: &str = "MIDISTRING_API_KEY";
pub const ENV_API_BASE: &str = "MIDISTRING_API_BASE";
pub const ENV_MODEL: &str = "MIDISTRING_MODEL";
pub const DEFAULT_API_BASE: &str = "https://api.openai.com/v1";
pub const DEFAULT_MODEL: &str = "gpt-4";

/// Exponential backoff for rate limiting and transient server errors.
#[derive(Clone, Debug, PartialEq)]
pub struct RetryPolicy {
    pub base_delay: Duration,
    pub factor: f64,
    pub max_retries: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base_delay: Duration::from_secs(1),
            factor: 2.0,
            max_retries: 5,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry `retry` (0-based) given a uniform draw `u` in [0, 1):
    /// half the exponential delay is fixed and half is jitter.
    pub fn delay(&self, retry: u32, u: f64) -> Duration {
        let full = self.base_delay.as_secs_f64() * self.factor.powi(retry as i32);
        Duration::from_secs_f64(full * (0.5 + 0.5 * u))
    }
}

pub struct RemoteHttp {
    api_base: String,
    api_key: String,
    model: String,
    retry: RetryPolicy,
    agent: ureq::Agent,
}

impl RemoteHttp {
    pub fn new(
        api_base: impl Into<String>,
        api_key: impl Into<String>,
        model: impl Into<String>,
    ) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        Self {
            api_base: api_base.into().trim_end_matches('/').to_string(),
            api_key: api_key.into(),
            model: model.into(),
            retry: RetryPolicy::default(),
            agent,
        }
    }

    /// Reads the key (required), base URL and model name from the environment.
    pub fn from_env() -> Result<Self, BackendError> {
        let key = std::env::var(ENV_API_KEY)
            .map_err(|_| BackendError::Config(format!("{ENV_API_KEY} is not set")))?;
        let base = std::env::var(ENV_API_BASE).unwrap_or_else(|_| DEFAULT_API_BASE.to_string());
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| DEFAULT_MODEL.to_string());
        Ok(Self::new(base, key, model))
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn request_body(&self, req: &CompletionRequest) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        if let Some(seed) = req.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn send_once(&self, body: &str) -> Result<(u16, String), BackendError> {
        let mut resp = self
            .agent
            .post(&format!("{}/chat/completions", self.api_base))
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .header("Content-Type", "application/json")
            .send(body)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok((status, text))
    }
}

fn retryable(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

pub fn parse_chat_response(text: &str) -> Result<String, BackendError> {
    let v: Value =
        serde_json::from_str(text).map_err(|e| BackendError::BadResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::BadResponse("no choices[0].message.content".into()))
}

impl LlmBackend for RemoteHttp {
    fn complete(&self, req: &CompletionRequest) -> Result<String, BackendError> {
        let body = self.request_body(req).to_string();
        let mut retry = 0;
        loop {
            let outcome = self.send_once(&body);
            let transient = match &outcome {
                Ok((status, _)) => retryable(*status),
                Err(BackendError::Transport(_)) => true,
                Err(_) => false,
            };
            if !transient {
                let (status, text) = outcome?;
                if !(200..300).contains(&status) {
                    return Err(BackendError::Http { status, body: text });
                }
                return parse_chat_response(&text);
            }
            if retry >= self.retry.max_retries {
                return Err(match outcome {
                    Ok((429, _)) => BackendError::RateLimited {
                        attempts: retry + 1,
                    },
                    Ok((status, body)) => BackendError::Http { status, body },
                    Err(e) => e,
                });
            }
            let wait = self.retry.delay(retry, rand::rng().random::<f64>());
            log::warn!("transient backend failure, retrying in {wait:?}");
            std::thread::sleep(wait);
            retry += 1;
        }
    }
}
