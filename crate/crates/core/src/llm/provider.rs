//! Completion providers: a completions-style HTTP endpoint and an offline
//! replay map keyed by prompt digest.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::digest::ContentHash;

/// Environment variable holding the provider API key.
pub const API_KEY_ENV: &str = "GI_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    pub stop: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionResponse {
    /// First choice's text, verbatim.
    pub text: String,
    pub provider_id: String,
    pub raw: String,
}

/// Sampling parameters sent with every request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionParams {
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_stop")]
    pub stop: Vec<String>,
}

fn default_model() -> String {
    "code-davinci-002".into()
}
fn default_max_tokens() -> u32 {
    512
}
fn default_temperature() -> f64 {
    0.8
}
fn default_stop() -> Vec<String> {
    vec!["\n\n#".into(), "\n\ndef ".into()]
}

impl Default for CompletionParams {
    fn default() -> Self {
        Self {
            model: default_model(),
            max_tokens: default_max_tokens(),
            temperature: default_temperature(),
            stop: default_stop(),
        }
    }
}

impl CompletionParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_tokens < 1 {
            return Err("max_tokens must be at least 1".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(format!("temperature {} outside [0, 2]", self.temperature));
        }
        Ok(())
    }

    pub fn request(&self, prompt: &str) -> CompletionRequest {
        CompletionRequest {
            model: self.model.clone(),
            prompt: prompt.to_string(),
            max_tokens: self.max_tokens,
            temperature: self.temperature,
            stop: self.stop.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderErrorKind {
    /// Connection, DNS, timeout.
    Transport,
    /// Non-success status other than 429.
    Http(u16),
    /// 429 after all retries.
    Quota,
    /// Response body did not contain `choices[0].text`.
    Decode,
    /// Mock map has no entry for the prompt.
    MockMiss,
}

#[derive(Debug, Clone, thiserror::Error)]
#[error("provider error ({kind:?}) after {attempts} attempt(s): {message}")]
pub struct ProviderError {
    pub kind: ProviderErrorKind,
    pub attempts: u32,
    pub message: String,
}

/// Where completions come from, for the run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderInfo {
    /// Endpoint URL, or `"mock"`.
    pub endpoint: String,
    pub model: String,
}

pub trait CompletionProvider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError>;
    fn info(&self) -> ProviderInfo;
    /// Requests issued so far, including failed ones.
    fn calls(&self) -> usize;
}

/// Offline provider replaying `{"<sha256(prompt)>": "<completion>"}`.
#[derive(Debug, Default)]
pub struct MockProvider {
    entries: HashMap<ContentHash, String>,
    calls: AtomicUsize,
}

impl MockProvider {
    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        let raw: HashMap<ContentHash, String> = serde_json::from_str(json)?;
        Ok(Self::from_entries(raw))
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (ContentHash, String)>) -> Self {
        Self {
            entries: entries.into_iter().collect(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl CompletionProvider for MockProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let key = ContentHash::of(&request.prompt);
        match self.entries.get(&key) {
            Some(text) => Ok(CompletionResponse {
                text: text.clone(),
                provider_id: "mock".into(),
                raw: text.clone(),
            }),
            None => Err(ProviderError {
                kind: ProviderErrorKind::MockMiss,
                attempts: 1,
                message: format!("no mock completion for prompt {}", key.short()),
            }),
        }
    }

    fn info(&self) -> ProviderInfo {
        ProviderInfo {
            endpoint: "mock".into(),
            model: "mock".into(),
        }
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    fn backoff(&self, retry: u32) -> Duration {
        self.initial_backoff.mul_f64(self.multiplier.powi(retry as i32))
    }
}

/// Blocking client for a completions-style endpoint.
///
/// Requests are serialized; with `requests_per_minute` set, consecutive
/// requests are spaced at least `60 / rpm` seconds apart.
pub struct HttpProvider {
    endpoint: String,
    api_key: Option<String>,
    retry: RetryPolicy,
    min_interval: Option<Duration>,
    agent: ureq::Agent,
    last_request: Mutex<Option<Instant>>,
    calls: AtomicUsize,
    model: String,
}

impl HttpProvider {
    pub fn new(endpoint: &str, model: &str) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.to_string(),
            api_key: std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty()),
            retry: RetryPolicy::default(),
            min_interval: None,
            agent,
            last_request: Mutex::new(None),
            calls: AtomicUsize::new(0),
            model: model.to_string(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rate_limit(mut self, requests_per_minute: Option<u32>) -> Self {
        self.min_interval = requests_per_minute
            .filter(|&r| r > 0)
            .map(|r| Duration::from_secs_f64(60.0 / r as f64));
        self
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    fn send_once(&self, request: &CompletionRequest) -> Result<CompletionResponse, (ProviderErrorKind, String, bool)> {
        let mut builder = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            builder = builder.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = builder
            .send_json(request)
            .map_err(|e| (ProviderErrorKind::Transport, e.to_string(), true))?;
        let status = response.status().as_u16();
        let raw = response
            .body_mut()
            .read_to_string()
            .map_err(|e| (ProviderErrorKind::Transport, e.to_string(), true))?;
        match status {
            200..=299 => {}
            429 => return Err((ProviderErrorKind::Quota, raw, true)),
            500..=599 => return Err((ProviderErrorKind::Http(status), raw, true)),
            _ => return Err((ProviderErrorKind::Http(status), raw, false)),
        }
        let value: serde_json::Value = serde_json::from_str(&raw)
            .map_err(|e| (ProviderErrorKind::Decode, e.to_string(), false))?;
        let text = value
            .pointer("/choices/0/text")
            .and_then(|t| t.as_str())
            .ok_or_else(|| (ProviderErrorKind::Decode, "missing choices[0].text".to_string(), false))?;
        let provider_id = value
            .get("id")
            .and_then(|v| v.as_str())
            .unwrap_or_default()
            .to_string();
        Ok(CompletionResponse {
            text: text.to_string(),
            provider_id,
            raw,
        })
    }
}

impl CompletionProvider for HttpProvider {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, ProviderError> {
        let mut last = self.last_request.lock().unwrap_or_else(|e| e.into_inner());
        let attempts = self.retry.attempts.max(1);
        let mut attempt = 0;
        loop {
            if let (Some(interval), Some(prev)) = (self.min_interval, *last) {
                let elapsed = prev.elapsed();
                if elapsed < interval {
                    std::thread::sleep(interval - elapsed);
                }
            }
            *last = Some(Instant::now());
            self.calls.fetch_add(1, Ordering::SeqCst);
            attempt += 1;
            match self.send_once(request) {
                Ok(response) => return Ok(response),
                Err((kind, message, retryable)) => {
                    if !retryable || attempt >= attempts {
                        return Err(ProviderError {
                            kind,
                            attempts: attempt,
                            message,
                        });
                    }
                    std::thread::sleep(self.retry.backoff(attempt - 1));
                }
            }
        }
    }

    fn info(&self) -> ProviderInfo {
        ProviderInfo {
            endpoint: self.endpoint.clone(),
            model: self.model.clone(),
        }
    }

    fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}
