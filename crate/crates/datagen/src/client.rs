//! Chat-completion client with bounded retries.

use std::time::Duration;

use log::{debug, warn};
use rand::Rng;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::prompt::Mode;

pub const DEFAULT_API_KEY_ENV: &str = "GRADRANK_API_KEY";

/// Generation settings as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub concurrency: usize,
    pub seed: u64,
    pub mode: Mode,
    pub timeout_secs: u64,
    /// Environment variable holding the bearer token; unset or empty means no auth header.
    pub api_key_env: String,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://127.0.0.1:8000/v1/chat/completions".into(),
            model: "default".into(),
            temperature: 1.0,
            max_tokens: 1024,
            concurrency: 4,
            seed: 0,
            mode: Mode::Multilevel,
            timeout_secs: 120,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.concurrency == 0 {
            return Err(Error::Config("concurrency must be ≥ 1".into()));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature {} must be ≥ 0", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(Error::Config("max_tokens must be ≥ 1".into()));
        }
        reqwest::Url::parse(&self.endpoint)
            .map_err(|e| Error::Config(format!("endpoint {:?}: {e}", self.endpoint)))?;
        Ok(())
    }

    fn api_key(&self) -> Option<String> {
        std::env::var(&self.api_key_env).ok().filter(|k| !k.is_empty())
    }
}

/// Exponential backoff: retry `r` (1-based) waits `base * factor^(r-1) * (1 + jitter * u)`
/// with `u` uniform in `[0, 1)`, capped at `max_delay`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
    pub jitter: f64,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            factor: 2.0,
            jitter: 0.5,
            max_delay: Duration::from_secs(60),
        }
    }
}

impl RetryPolicy {
    pub fn delay<R: Rng + ?Sized>(&self, retry: u32, rng: &mut R) -> Duration {
        let exp = self.factor.powi(retry.saturating_sub(1) as i32);
        let spread = 1.0 + self.jitter * rng.random::<f64>();
        self.base_delay.mul_f64(exp * spread).min(self.max_delay)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    /// HTTP attempts used, including the successful one.
    pub attempts: u32,
}

fn retryable(status: StatusCode) -> bool {
    status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS
}

/// First choice's message content.
fn first_choice_text(body: &Value) -> Result<String> {
    let choice = body
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| Error::Malformed("no choices in response".into()))?;
    choice
        .pointer("/message/content")
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| Error::Malformed("first choice has no text content".into()))
}

#[derive(Debug, Clone)]
pub struct ChatClient {
    http: reqwest::Client,
    endpoint: String,
    model: String,
    temperature: f64,
    max_tokens: u32,
    api_key: Option<String>,
    retry: RetryPolicy,
}

impl ChatClient {
    pub fn new(config: &GenerationConfig) -> Result<Self> {
        config.validate()?;
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(Self {
            http,
            endpoint: config.endpoint.clone(),
            model: config.model.clone(),
            temperature: config.temperature,
            max_tokens: config.max_tokens,
            api_key: config.api_key(),
            retry: RetryPolicy::default(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        })
    }

    /// Sends one chat-completion request, retrying transport failures, 5xx and 429.
    /// `rng` only drives backoff jitter.
    pub async fn complete<R: Rng + ?Sized>(&self, prompt: &str, rng: &mut R) -> Result<Completion> {
        let body = self.request_body(prompt);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let mut request = self.http.post(&self.endpoint).json(&body);
            if let Some(key) = &self.api_key {
                request = request.bearer_auth(key);
            }
            let (status, message) = match request.send().await {
                Ok(response) => {
                    let status = response.status();
                    if status.is_success() {
                        let text = response
                            .text()
                            .await
                            .map_err(|e| Error::Malformed(format!("reading body: {e}")))?;
                        let parsed: Value =
                            serde_json::from_str(&text).map_err(|e| Error::Malformed(e.to_string()))?;
                        return Ok(Completion {
                            text: first_choice_text(&parsed)?,
                            attempts: attempt,
                        });
                    }
                    let detail = response.text().await.unwrap_or_default();
                    let message = format!("HTTP {status}: {}", detail.chars().take(200).collect::<String>());
                    if !retryable(status) {
                        return Err(Error::Endpoint {
                            attempts: attempt,
                            status: Some(status.as_u16()),
                            message,
                        });
                    }
                    (Some(status.as_u16()), message)
                }
                Err(e) => (None, format!("transport: {e}")),
            };
            if attempt >= self.retry.max_attempts {
                warn!("giving up after {attempt} attempts: {message}");
                return Err(Error::Endpoint {
                    attempts: attempt,
                    status,
                    message,
                });
            }
            let wait = self.retry.delay(attempt, rng);
            debug!("attempt {attempt} failed ({message}); retrying in {wait:?}");
            tokio::time::sleep(wait).await;
        }
    }
}
