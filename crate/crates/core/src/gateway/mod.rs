//! Provider-agnostic chat completion with persistent record/replay.
//!
//! Every LLM-dependent stage goes through [`Gateway::complete`]. In replay
//! mode responses come only from the cassette store and no backend is ever
//! constructed, so a run is a pure function of its inputs and cassettes.
//!
//! ```text
//! live    -> backend
//! record  -> store hit ? stored : backend, then persist
//! replay  -> store hit ? stored : MissingCassette
//! ```

mod cassette;
mod providers;
mod retry;
mod scripted;

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cassette::{CassetteEntry, CassetteStore};
pub use providers::{credential_var, HttpBackend};
pub use retry::RetryPolicy;
pub use scripted::{FnBackend, ScriptedBackend};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// `provider:model`, e.g. `openai:gpt-4.1-mini`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModelTag {
    pub provider: String,
    pub model: String,
}

impl ModelTag {
    pub fn new(provider: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            provider: provider.into(),
            model: model.into(),
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.provider, self.model)
    }
}

impl FromStr for ModelTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            Some((p, m)) if !p.trim().is_empty() && !m.trim().is_empty() => {
                Ok(ModelTag::new(p.trim().to_ascii_lowercase(), m.trim()))
            }
            _ => Err(format!("model tag `{s}` must look like provider:model")),
        }
    }
}

impl TryFrom<String> for ModelTag {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ModelTag> for String {
    fn from(t: ModelTag) -> String {
        t.to_string()
    }
}

/// Sampling parameters as requested by a driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub top_p: f64,
    pub max_output: u32,
}

impl Sampling {
    pub const fn new(temperature: f64, top_p: f64, max_output: u32) -> Self {
        Self {
            temperature,
            top_p,
            max_output,
        }
    }
}

/// Default output cap; generous so that long anonymized documents fit.
pub const DEFAULT_MAX_OUTPUT: u32 = 8192;

/// Highest temperature a provider accepts, if it caps below the usual 2.0.
pub fn provider_max_temperature(provider: &str) -> Option<f64> {
    match provider {
        "anthropic" => Some(1.0),
        _ => None,
    }
}

/// Temperature actually sent to `provider` for a requested value.
pub fn effective_temperature(provider: &str, requested: f64) -> f64 {
    match provider_max_temperature(provider) {
        Some(cap) if requested > cap => cap,
        _ => requested,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub provider: String,
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_output: u32,
}

impl ChatRequest {
    /// Builds a request for `tag`, applying the provider's temperature cap.
    pub fn new(tag: &ModelTag, messages: Vec<Message>, sampling: Sampling) -> Self {
        let temperature = effective_temperature(&tag.provider, sampling.temperature);
        if temperature != sampling.temperature {
            log::info!(
                "{}: temperature {} exceeds provider cap, using {}",
                tag,
                sampling.temperature,
                temperature
            );
        }
        Self {
            provider: tag.provider.clone(),
            model: tag.model.clone(),
            messages,
            temperature,
            top_p: sampling.top_p,
            max_output: sampling.max_output,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("messages must be non-empty".into()));
        }
        if self.temperature < 0.0 || !self.temperature.is_finite() {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} must be >= 0",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::InvalidRequest(format!(
                "top_p {} must be in (0, 1]",
                self.top_p
            )));
        }
        if self.max_output == 0 {
            return Err(GatewayError::InvalidRequest("max_output must be positive".into()));
        }
        Ok(())
    }

    /// Stable digest over provider, model, temperature, top_p and messages.
    pub fn key(&self) -> CassetteKey {
        #[derive(Serialize)]
        struct CanonMessage<'a> {
            content: &'a str,
            role: Role,
        }
        #[derive(Serialize)]
        struct Canon<'a> {
            messages: Vec<CanonMessage<'a>>,
            model: &'a str,
            provider: &'a str,
            temperature: String,
            top_p: String,
        }
        let canon = Canon {
            messages: self
                .messages
                .iter()
                .map(|m| CanonMessage {
                    content: &m.content,
                    role: m.role,
                })
                .collect(),
            model: &self.model,
            provider: &self.provider,
            temperature: format!("{:?}", self.temperature),
            top_p: format!("{:?}", self.top_p),
        };
        let bytes = serde_json::to_vec(&canon).expect("canonical form serializes");
        CassetteKey(hex::encode(Sha256::digest(bytes)))
    }

    /// One-line description used in diagnostics.
    pub fn summary(&self) -> String {
        let first = self
            .messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("");
        let head: String = first.chars().take(60).collect();
        format!(
            "{}:{} t={} p={} `{}`",
            self.provider,
            self.model,
            self.temperature,
            self.top_p,
            head.replace('\n', " ")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CassetteKey(pub String);

impl fmt::Display for CassetteKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Other,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: FinishReason,
    #[serde(default)]
    pub usage: Usage,
}

impl ChatResponse {
    pub fn stop(content: impl Into<String>) -> Self {
        Self {
            content: content.into(),
            finish_reason: FinishReason::Stop,
            usage: Usage::default(),
        }
    }

    pub fn truncated(&self) -> bool {
        self.finish_reason == FinishReason::Length
    }
}

/// Failure reported by a backend for a single attempt.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limited")]
    RateLimited { retry_after_secs: Option<u64> },
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("no cassette for request {key} ({summary})")]
    MissingCassette { key: CassetteKey, summary: String },
    #[error("no credentials for provider `{provider}`: set {var}")]
    NoCredentials { provider: String, var: String },
    #[error("provider `{provider}` rejected credentials: {detail}")]
    Auth { provider: String, detail: String },
    #[error("provider `{provider}` still rate limited after {attempts} attempts")]
    RateLimited { provider: String, attempts: u32 },
    #[error("provider `{provider}` failed after {attempts} attempts: {detail}")]
    Transport {
        provider: String,
        attempts: u32,
        detail: String,
    },
    #[error("malformed response from `{provider}`: {detail}")]
    Malformed { provider: String, detail: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("gateway in {0} mode has no backend")]
    NoBackend(GatewayMode),
    #[error("cassette store: {0}")]
    Store(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    Live,
    Record,
    Replay,
}

impl fmt::Display for GatewayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatewayMode::Live => "live",
            GatewayMode::Record => "record",
            GatewayMode::Replay => "replay",
        })
    }
}

/// A synchronous chat-completion backend.
pub trait ChatBackend: Send + Sync {
    fn send(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError>;
}

/// Counting semaphore bounding concurrent backend calls.
struct Limiter {
    permits: Mutex<usize>,
    freed: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Self {
            permits: Mutex::new(n.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut p = self.permits.lock().expect("limiter poisoned");
        while *p == 0 {
            p = self.freed.wait(p).expect("limiter poisoned");
        }
        *p -= 1;
        LimiterGuard(self)
    }
}

struct LimiterGuard<'a>(&'a Limiter);

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("limiter poisoned") += 1;
        self.0.freed.notify_one();
    }
}

/// Default number of concurrent backend requests.
pub const DEFAULT_FANOUT: usize = 4;

pub struct Gateway {
    mode: GatewayMode,
    store: Option<CassetteStore>,
    backend: Option<Arc<dyn ChatBackend>>,
    retry: RetryPolicy,
    limiter: Limiter,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("mode", &self.mode)
            .field("store", &self.store)
            .field("has_backend", &self.backend.is_some())
            .finish()
    }
}

impl Gateway {
    /// Replay-only gateway; never touches the network.
    pub fn replay(store: CassetteStore) -> Self {
        Self::with_parts(GatewayMode::Replay, Some(store), None)
    }

    /// Calls `backend` and persists every response into `store`.
    pub fn record(store: CassetteStore, backend: Arc<dyn ChatBackend>) -> Self {
        Self::with_parts(GatewayMode::Record, Some(store), Some(backend))
    }

    pub fn live(backend: Arc<dyn ChatBackend>) -> Self {
        Self::with_parts(GatewayMode::Live, None, Some(backend))
    }

    fn with_parts(
        mode: GatewayMode,
        store: Option<CassetteStore>,
        backend: Option<Arc<dyn ChatBackend>>,
    ) -> Self {
        Self {
            mode,
            store,
            backend,
            retry: RetryPolicy::default(),
            limiter: Limiter::new(DEFAULT_FANOUT),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_fanout(mut self, n: usize) -> Self {
        self.limiter = Limiter::new(n);
        self
    }

    pub fn mode(&self) -> GatewayMode {
        self.mode
    }

    pub fn store(&self) -> Option<&CassetteStore> {
        self.store.as_ref()
    }

    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        req.validate()?;
        let key = req.key();
        match self.mode {
            GatewayMode::Replay => {
                let store = self.store.as_ref().ok_or(GatewayError::NoBackend(self.mode))?;
                match store.get(&key)? {
                    Some(entry) => Ok(entry.response),
                    None => Err(GatewayError::MissingCassette {
                        key,
                        summary: req.summary(),
                    }),
                }
            }
            GatewayMode::Record => {
                let store = self.store.as_ref().ok_or(GatewayError::NoBackend(self.mode))?;
                if let Some(entry) = store.get(&key)? {
                    return Ok(entry.response);
                }
                let response = self.call_backend(req)?;
                store.put(&CassetteEntry {
                    key,
                    request: req.clone(),
                    response: response.clone(),
                })?;
                Ok(response)
            }
            GatewayMode::Live => self.call_backend(req),
        }
    }

    fn call_backend(&self, req: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let backend = self.backend.as_ref().ok_or(GatewayError::NoBackend(self.mode))?;
        let _permit = self.limiter.acquire();
        log::debug!("request {}", req.summary());
        let response = self.retry.run(&req.provider, || backend.send(req))?;
        if response.truncated() {
            log::warn!("response truncated at max_output={}: {}", req.max_output, req.summary());
        }
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(temperature: f64) -> ChatRequest {
        ChatRequest::new(
            &"openai:gpt-4.1".parse().unwrap(),
            vec![Message::system("sys"), Message::user("hello")],
            Sampling::new(temperature, 1.0, 256),
        )
    }

    #[test]
    fn keys_are_stable_and_field_sensitive() {
        assert_eq!(req(0.05).key(), req(0.05).key());
        assert_ne!(req(0.05).key(), req(1.5).key());
        let mut r = req(0.05);
        r.model = "gpt-4.1-mini".into();
        assert_ne!(r.key(), req(0.05).key());
        let mut r = req(0.05);
        r.messages[1].content.push(' ');
        assert_ne!(r.key(), req(0.05).key());
        let mut r = req(0.05);
        r.top_p = 0.9;
        assert_ne!(r.key(), req(0.05).key());
    }

    #[test]
    fn anthropic_temperature_is_capped() {
        let tag: ModelTag = "anthropic:claude-haiku-4-5".parse().unwrap();
        let r = ChatRequest::new(&tag, vec![Message::user("x")], Sampling::new(1.5, 1.0, 10));
        assert_eq!(r.temperature, 1.0);
        assert_eq!(effective_temperature("openai", 1.5), 1.5);
    }

    #[test]
    fn request_validation() {
        let mut r = req(0.1);
        r.messages.clear();
        assert!(r.validate().is_err());
        let mut r = req(0.1);
        r.top_p = 0.0;
        assert!(r.validate().is_err());
        assert!(req(0.1).validate().is_ok());
    }

    #[test]
    fn model_tag_parsing() {
        let t: ModelTag = "OpenAI:gpt-4.1".parse().unwrap();
        assert_eq!(t.provider, "openai");
        assert_eq!(t.to_string(), "openai:gpt-4.1");
        assert!("gpt-4.1".parse::<ModelTag>().is_err());
    }

    #[test]
    fn replay_miss_names_key() {
        let dir = tempfile::tempdir().unwrap();
        let gw = Gateway::replay(CassetteStore::open(dir.path()).unwrap());
        let r = req(0.1);
        match gw.complete(&r) {
            Err(GatewayError::MissingCassette { key, .. }) => assert_eq!(key, r.key()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn record_then_replay_is_identical_and_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let backend = Arc::new(ScriptedBackend::new().reply_when(&["hello"], "world\n  with spacing"));
        let gw = Gateway::record(CassetteStore::open(dir.path()).unwrap(), backend.clone());
        let first = gw.complete(&req(0.1)).unwrap();
        let second = gw.complete(&req(0.1)).unwrap();
        assert_eq!(first, second);
        assert_eq!(backend.calls(), 1);
        assert_eq!(gw.store().unwrap().len().unwrap(), 1);

        let replay = Gateway::replay(CassetteStore::open(dir.path()).unwrap());
        assert_eq!(replay.complete(&req(0.1)).unwrap().content, "world\n  with spacing");
    }
}
