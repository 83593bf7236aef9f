//! Chat-completion HTTP backend.
//!
//! Each call is one `POST {base_url}/chat/completions` with a system message
//! holding the instruction and a user message holding the serialized prompt.
//! The answer is the first choice's message content, returned verbatim.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use cardest_core::inference::{Backend, Capabilities, DecodeOptions};
use cardest_core::prompt::{serialize_prompt, Prompt, INSTRUCTION};
use cardest_core::{Error, EstimateSource};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

pub const DEFAULT_TOKEN_ENV: &str = "CARDEST_API_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    pub base_url: String,
    pub model: String,
    pub timeout_ms: u64,
    pub max_in_flight: usize,
    /// Extra attempts after the first.
    pub retries: u32,
    /// First backoff delay; doubles on every retry.
    pub backoff_ms: u64,
    /// Environment variable holding the bearer token, if any.
    pub token_env: String,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        RemoteConfig {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model: "cardest".into(),
            timeout_ms: 30_000,
            max_in_flight: 4,
            retries: 3,
            backoff_ms: 200,
            token_env: DEFAULT_TOKEN_ENV.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RemoteError {
    #[error("request {request_id} timed out after {timeout_ms} ms")]
    Timeout { request_id: String, timeout_ms: u64 },
    #[error("request {request_id}: HTTP status {status}: {body}")]
    Status { request_id: String, status: u16, body: String },
    #[error("request {request_id}: malformed response: {msg}")]
    Malformed { request_id: String, msg: String },
    #[error("request {request_id}: transport error: {msg}")]
    Transport { request_id: String, msg: String },
    #[error("invalid remote config: {0}")]
    Config(String),
}

impl RemoteError {
    pub fn is_transient(&self) -> bool {
        match self {
            RemoteError::Timeout { .. } | RemoteError::Transport { .. } => true,
            RemoteError::Status { status, .. } => *status == 429 || *status >= 500,
            RemoteError::Malformed { .. } | RemoteError::Config(_) => false,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.free.lock().unwrap_or_else(|p| p.into_inner());
        while *n == 0 {
            n = self.cv.wait(n).unwrap_or_else(|p| p.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|p| p.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    token: Option<String>,
    agent: ureq::Agent,
    slots: Slots,
    next_id: AtomicU64,
}

impl std::fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteBackend").field("config", &self.config).finish_non_exhaustive()
    }
}

impl RemoteBackend {
    /// Validates the config and reads the token from the environment.
    pub fn new(config: RemoteConfig) -> Result<Self, RemoteError> {
        if !(config.base_url.starts_with("http://") || config.base_url.starts_with("https://")) {
            return Err(RemoteError::Config(format!("base_url `{}` is not an http(s) URL", config.base_url)));
        }
        if config.max_in_flight == 0 {
            return Err(RemoteError::Config("max_in_flight must be >= 1".into()));
        }
        if config.timeout_ms == 0 {
            return Err(RemoteError::Config("timeout_ms must be >= 1".into()));
        }
        let token = std::env::var(&config.token_env).ok().filter(|t| !t.is_empty());
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(RemoteBackend {
            slots: Slots {
                free: Mutex::new(config.max_in_flight),
                cv: Condvar::new(),
            },
            config,
            token,
            agent,
            next_id: AtomicU64::new(1),
        })
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    /// Sends `prompt_text` and returns the assistant text, retrying
    /// transient failures with exponential backoff.
    pub fn complete_text(&self, prompt_text: &str, opts: &DecodeOptions) -> Result<String, RemoteError> {
        let seq = self.next_id.fetch_add(1, Ordering::Relaxed);
        let body = json!({
            "model": self.config.model,
            "messages": [
                {"role": "system", "content": INSTRUCTION},
                {"role": "user", "content": prompt_text},
            ],
            "temperature": opts.temperature,
            "seed": opts.seed,
        })
        .to_string();
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempt = 0;
        loop {
            let request_id = format!("cardest-{}-{seq}-{attempt}", std::process::id());
            let res = {
                let _permit = self.slots.acquire();
                self.send_once(&body, &request_id)
            };
            match res {
                Err(e) if e.is_transient() && attempt < self.config.retries => {
                    log::warn!("{e}; retrying in {} ms", delay.as_millis());
                    thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn send_once(&self, body: &str, request_id: &str) -> Result<String, RemoteError> {
        let started = Instant::now();
        let mut req = self
            .agent
            .post(&self.endpoint())
            .header("Content-Type", "application/json")
            .header("X-Request-Id", request_id);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let transport = |e: ureq::Error| self.classify(e, request_id, started);
        let mut resp = req.send(body).map_err(transport)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(transport)?;
        if !(200..300).contains(&status) {
            return Err(RemoteError::Status {
                request_id: request_id.into(),
                status,
                body: text.chars().take(200).collect(),
            });
        }
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| RemoteError::Malformed {
            request_id: request_id.into(),
            msg: e.to_string(),
        })?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| RemoteError::Malformed {
                request_id: request_id.into(),
                msg: "no choices[0].message.content string".into(),
            })
    }

    fn classify(&self, e: ureq::Error, request_id: &str, started: Instant) -> RemoteError {
        let timed_out = match &e {
            ureq::Error::Timeout(_) => true,
            ureq::Error::Io(io) => io.kind() == std::io::ErrorKind::TimedOut || io.kind() == std::io::ErrorKind::WouldBlock,
            _ => false,
        };
        if timed_out || started.elapsed() >= Duration::from_millis(self.config.timeout_ms) {
            RemoteError::Timeout {
                request_id: request_id.into(),
                timeout_ms: self.config.timeout_ms,
            }
        } else {
            RemoteError::Transport {
                request_id: request_id.into(),
                msg: e.to_string(),
            }
        }
    }
}

impl Backend for RemoteBackend {
    fn complete(&self, prompt: &Prompt, opts: &DecodeOptions) -> cardest_core::Result<String> {
        self.complete_text(&serialize_prompt(prompt), opts)
            .map_err(|e| Error::Backend(e.to_string()))
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            supports_seeded_sampling: true,
            is_deterministic: false,
            concurrent: true,
        }
    }

    fn source(&self) -> EstimateSource {
        EstimateSource::Remote
    }
}
