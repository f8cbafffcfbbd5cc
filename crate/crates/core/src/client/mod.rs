//! Dispatch of rendered requests to a chat-style multimodal endpoint.
//!
//! Three modes share one entry point, [`ModelClient::complete`]:
//!
//! * `Live` talks to the endpoint.
//! * `Record` talks to the endpoint and appends every successful reply to a
//!   JSONL session keyed by request digest.
//! * `Replay` answers from a session and never touches the network; a digest
//!   missing from the session is an error.
//!
//! Transient failures (timeouts, 429, 5xx) are retried with exponential
//! backoff and full jitter. Authentication failures are not.

mod backoff;
mod http;
mod session;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompts::RenderedRequest;

pub use backoff::Backoff;
pub use http::{ChatCompletions, HttpTransport, Transport, TransportFailure, WireAdapter};
pub use session::{ReplaySession, SessionEntry, SessionRecorder};

pub const DEFAULT_AUTH_ENV: &str = "MODEL_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelEndpointConfig {
    pub base_url: String,
    pub model_id: String,
    /// Environment variable holding the bearer token.
    pub auth_env: String,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub max_concurrent: usize,
    pub backoff: Backoff,
}

impl Default for ModelEndpointConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1".into(),
            model_id: "unset".into(),
            auth_env: DEFAULT_AUTH_ENV.into(),
            timeout_secs: 120,
            max_retries: 4,
            max_concurrent: 4,
            backoff: Backoff::default(),
        }
    }
}

impl ModelEndpointConfig {
    pub fn validate(&self) -> Result<(), ClientError> {
        if self.max_concurrent == 0 {
            return Err(ClientError::InvalidConfig("max_concurrent must be at least 1".into()));
        }
        if self.timeout_secs == 0 {
            return Err(ClientError::InvalidConfig("timeout_secs must be positive".into()));
        }
        if self.backoff.factor.is_nan() || self.backoff.factor < 1.0 {
            return Err(ClientError::InvalidConfig("backoff factor must be >= 1".into()));
        }
        Ok(())
    }

    /// Reads the token from `auth_env`.
    pub fn resolve_token(&self) -> Result<String, ClientError> {
        match std::env::var(&self.auth_env) {
            Ok(t) if !t.trim().is_empty() => Ok(t),
            _ => Err(ClientError::MissingAuth { env: self.auth_env.clone() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelResponse {
    /// Model output, byte-exact.
    pub raw_text: String,
    pub latency_ms: u64,
    /// Network attempts made; 0 for replayed responses.
    pub attempt_count: u32,
    pub request_digest: String,
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("auth token missing: set the `{env}` environment variable")]
    MissingAuth { env: String },
    #[error("endpoint rejected credentials (HTTP {status}) after {attempts} attempt(s)")]
    Auth { status: u16, attempts: u32 },
    #[error("gave up after {attempts} attempt(s); last cause: {last_cause}")]
    RetriesExhausted { attempts: u32, last_cause: String },
    #[error("request failed: {0}")]
    Rejected(String),
    #[error("malformed endpoint reply: {0}")]
    Malformed(String),
    #[error("replay miss: no recorded response for request digest {digest}")]
    ReplayMiss { digest: String },
    #[error("session file {path}: {detail}")]
    Session { path: PathBuf, detail: String },
    #[error("invalid endpoint config: {0}")]
    InvalidConfig(String),
}

impl ClientError {
    pub fn class(&self) -> &'static str {
        match self {
            ClientError::MissingAuth { .. } => "missing_auth",
            ClientError::Auth { .. } => "auth",
            ClientError::RetriesExhausted { .. } => "retries_exhausted",
            ClientError::Rejected(_) => "rejected",
            ClientError::Malformed(_) => "malformed_reply",
            ClientError::ReplayMiss { .. } => "replay_miss",
            ClientError::Session { .. } => "session",
            ClientError::InvalidConfig(_) => "config",
        }
    }
}

enum Backend {
    Network {
        transport: Box<dyn Transport>,
        recorder: Option<SessionRecorder>,
    },
    Replay(ReplaySession),
}

/// Thread-safe client; share it by reference across workers.
pub struct ModelClient {
    cfg: ModelEndpointConfig,
    adapter: Box<dyn WireAdapter>,
    backend: Backend,
}

impl ModelClient {
    /// Live HTTP client. Fails if the auth variable is unset.
    pub fn live(cfg: ModelEndpointConfig) -> Result<Self, ClientError> {
        cfg.validate()?;
        let token = cfg.resolve_token()?;
        let transport = HttpTransport::new(&cfg.base_url, Some(token), Duration::from_secs(cfg.timeout_secs));
        Ok(Self::with_transport(cfg, Box::new(transport)))
    }

    /// Live client that also records successful replies to `session`.
    pub fn recording(cfg: ModelEndpointConfig, session: impl Into<PathBuf>) -> Result<Self, ClientError> {
        let mut client = Self::live(cfg)?;
        client.record_to(session)?;
        Ok(client)
    }

    /// Offline client answering from a recorded session.
    pub fn replay(cfg: ModelEndpointConfig, session: impl Into<PathBuf>) -> Result<Self, ClientError> {
        cfg.validate()?;
        Ok(Self::from_session(cfg, ReplaySession::load(session.into())?))
    }

    pub fn from_session(cfg: ModelEndpointConfig, session: ReplaySession) -> Self {
        Self { cfg, adapter: Box::new(ChatCompletions), backend: Backend::Replay(session) }
    }

    /// Client over an arbitrary transport (custom vendors, tests).
    pub fn with_transport(cfg: ModelEndpointConfig, transport: Box<dyn Transport>) -> Self {
        Self {
            cfg,
            adapter: Box::new(ChatCompletions),
            backend: Backend::Network { transport, recorder: None },
        }
    }

    pub fn with_adapter(mut self, adapter: Box<dyn WireAdapter>) -> Self {
        self.adapter = adapter;
        self
    }

    /// Starts recording to `session`. Has no effect in replay mode.
    pub fn record_to(&mut self, session: impl Into<PathBuf>) -> Result<(), ClientError> {
        if let Backend::Network { recorder, .. } = &mut self.backend {
            *recorder = Some(SessionRecorder::open(session.into())?);
        }
        Ok(())
    }

    pub fn config(&self) -> &ModelEndpointConfig {
        &self.cfg
    }

    /// `live`, `record` or `replay`.
    pub fn mode(&self) -> &'static str {
        match &self.backend {
            Backend::Network { recorder: None, .. } => "live",
            Backend::Network { recorder: Some(_), .. } => "record",
            Backend::Replay(_) => "replay",
        }
    }

    pub fn session_path(&self) -> Option<PathBuf> {
        match &self.backend {
            Backend::Network { recorder, .. } => recorder.as_ref().map(|r| r.path().to_path_buf()),
            Backend::Replay(s) => Some(s.path().to_path_buf()),
        }
    }

    pub fn complete(&self, req: &RenderedRequest) -> Result<ModelResponse, ClientError> {
        let request_digest = req.digest();
        let (transport, recorder) = match &self.backend {
            Backend::Replay(session) => {
                return match session.get(&request_digest) {
                    Some(text) => Ok(ModelResponse {
                        raw_text: text.to_string(),
                        latency_ms: 0,
                        attempt_count: 0,
                        request_digest,
                    }),
                    None => Err(ClientError::ReplayMiss { digest: request_digest }),
                };
            }
            Backend::Network { transport, recorder } => (transport, recorder),
        };

        let body = self.adapter.body(req, &self.cfg.model_id);
        let max_attempts = self.cfg.max_retries + 1;
        let mut attempt = 0;
        loop {
            attempt += 1;
            let started = Instant::now();
            match transport.post_json(self.adapter.path(), &body) {
                Ok(reply) => {
                    let latency_ms = started.elapsed().as_millis() as u64;
                    let raw_text = self.adapter.extract_text(&reply).map_err(ClientError::Malformed)?;
                    if let Some(rec) = recorder {
                        rec.append(&request_digest, &raw_text)?;
                    }
                    return Ok(ModelResponse { raw_text, latency_ms, attempt_count: attempt, request_digest });
                }
                Err(TransportFailure::Status { code: status @ (401 | 403), .. }) => {
                    return Err(ClientError::Auth { status, attempts: attempt });
                }
                Err(f) if f.is_transient() => {
                    if attempt >= max_attempts {
                        return Err(ClientError::RetriesExhausted { attempts: attempt, last_cause: f.to_string() });
                    }
                    std::thread::sleep(self.cfg.backoff.delay(attempt));
                }
                Err(f) => return Err(ClientError::Rejected(f.to_string())),
            }
        }
    }

    /// Completes every request on at most `max_concurrent` worker threads.
    /// Results come back in input order.
    pub fn complete_all(&self, reqs: &[RenderedRequest]) -> Vec<Result<ModelResponse, ClientError>> {
        let workers = self.cfg.max_concurrent.max(1).min(reqs.len().max(1));
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<ModelResponse, ClientError>>>> =
            Mutex::new((0..reqs.len()).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(req) = reqs.get(i) else { break };
                    let result = self.complete(req);
                    slots.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(result);
                });
            }
        });
        slots
            .into_inner()
            .unwrap_or_else(|p| p.into_inner())
            .into_iter()
            .map(|r| r.expect("every slot filled"))
            .collect()
    }
}
