//! Chat-completion gateway: retries, API-key rotation, bounded concurrency,
//! persistent response caching, and cassette record/replay.
//!
//! The gateway is shareable across threads. Every request is identified by a
//! stable fingerprint (see [`fingerprint`]) that keys both the disk cache and
//! cassette records, so a run can be recorded once and replayed forever with
//! zero network access.

mod cache;
mod cassette;
pub mod cost;
mod fingerprint;
mod http;

use std::fmt;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use cache::ResponseCache;
pub use cassette::{Cassette, CassetteRecord};
pub use cost::{estimate_cost, CostError, Money, Rate};
pub use fingerprint::fingerprint;
pub use http::{chat_completions_url, HttpTransport, RawResponse, Transport, TransportError};

/// The model the experiments default to.
pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

/// Default chat-completions endpoint base.
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1";

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("authentication failed with HTTP {status}; check your API keys")]
    Auth { status: u16 },
    #[error("retries exhausted after {attempts} attempts: {last_error}")]
    ExhaustedRetries { attempts: u32, last_error: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("no recording for fingerprint {fingerprint} (replay mode is offline)")]
    MissingRecording { fingerprint: String },
    #[error("cassette holds a conflicting record for fingerprint {fingerprint}")]
    CassetteCollision { fingerprint: String },
    #[error("cassette {path} line {line}: {reason}")]
    CassetteFormat {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("unexpected HTTP {status}: {body}")]
    UnexpectedStatus { status: u16, body: String },
    #[error("no API keys configured (set PROMPTAV_API_KEYS or api_keys in the config)")]
    NoApiKeys,
    #[error("chat request must contain at least one message")]
    EmptyMessages,
    #[error("{mode} mode requires a cassette path")]
    CassetteRequired { mode: GatewayMode },
    #[error("max_in_flight must be at least 1")]
    InvalidConcurrency,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Chat message author.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// One message in a chat transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

/// A model invocation. Temperature defaults to 0 so repeated runs are as
/// deterministic as the provider allows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

impl ChatRequest {
    /// A single-user-message request at temperature 0.
    pub fn user(model_id: &str, content: &str) -> Self {
        Self {
            model_id: model_id.to_string(),
            messages: vec![ChatMessage {
                role: Role::User,
                content: content.to_string(),
            }],
            temperature: 0.0,
        }
    }

    fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::EmptyMessages);
        }
        Ok(())
    }
}

/// A model reply with its token accounting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub model_id: String,
}

impl ChatResponse {
    pub fn total_tokens(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

/// An API key; its Debug form never reveals the key material.
#[derive(Clone, PartialEq, Eq)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    /// The actual secret, for constructing the Authorization header.
    pub fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(****)")
    }
}

impl From<&str> for ApiKey {
    fn from(key: &str) -> Self {
        Self::new(key)
    }
}

/// Where responses come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GatewayMode {
    /// Network only.
    Live,
    /// Cassette only; a request absent from the cassette is an error.
    Replay,
    /// Cassette when present, network otherwise; new exchanges are appended.
    Record,
}

impl fmt::Display for GatewayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatewayMode::Live => "live",
            GatewayMode::Replay => "replay",
            GatewayMode::Record => "record",
        })
    }
}

impl std::str::FromStr for GatewayMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "live" => Ok(GatewayMode::Live),
            "replay" => Ok(GatewayMode::Replay),
            "record" => Ok(GatewayMode::Record),
            other => Err(format!(
                "unknown mode {other:?} (expected live, replay or record)"
            )),
        }
    }
}

/// Retry policy for transient failures (HTTP 429/5xx and transport errors).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_backoff: Duration::from_secs(1),
        }
    }
}

/// Gateway configuration. `Debug` is safe to log: keys are redacted.
#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub endpoint_url: String,
    pub api_keys: Vec<ApiKey>,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
    pub cache_dir: PathBuf,
    pub mode: GatewayMode,
    pub cassette_path: Option<PathBuf>,
    pub timeout: Duration,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            endpoint_url: DEFAULT_ENDPOINT.into(),
            api_keys: Vec::new(),
            max_in_flight: 4,
            retry: RetryPolicy::default(),
            cache_dir: PathBuf::from(".promptav/cache"),
            mode: GatewayMode::Live,
            cassette_path: None,
            timeout: Duration::from_secs(120),
        }
    }
}

/// Counting semaphore bounding concurrent backend calls.
#[derive(Debug)]
struct Semaphore {
    permits: Mutex<usize>,
    released: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits),
            released: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut available = self.permits.lock().expect("semaphore lock poisoned");
        while *available == 0 {
            available = self
                .released
                .wait(available)
                .expect("semaphore lock poisoned");
        }
        *available -= 1;
        Permit { semaphore: self }
    }
}

struct Permit<'a> {
    semaphore: &'a Semaphore,
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut available = self
            .semaphore
            .permits
            .lock()
            .expect("semaphore lock poisoned");
        *available += 1;
        self.semaphore.released.notify_one();
    }
}

/// The chat-completion gateway.
pub struct Gateway {
    config: GatewayConfig,
    transport: Box<dyn Transport>,
    cache: ResponseCache,
    cassette: Option<Mutex<Cassette>>,
    key_cursor: AtomicUsize,
    limiter: Semaphore,
    backend_attempts: AtomicU64,
}

impl fmt::Debug for Gateway {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Gateway")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Gateway {
    /// Gateway over a real HTTP transport.
    pub fn new(config: GatewayConfig) -> Result<Self, GatewayError> {
        let transport = Box::new(HttpTransport::new(config.timeout));
        Self::with_transport(config, transport)
    }

    /// Gateway over a caller-supplied transport (tests, alternative stacks).
    pub fn with_transport(
        config: GatewayConfig,
        transport: Box<dyn Transport>,
    ) -> Result<Self, GatewayError> {
        if config.max_in_flight == 0 {
            return Err(GatewayError::InvalidConcurrency);
        }
        let cassette = match (config.mode, &config.cassette_path) {
            (GatewayMode::Live, _) => None,
            (_, Some(path)) => Some(Mutex::new(Cassette::load(path)?)),
            (mode, None) => return Err(GatewayError::CassetteRequired { mode }),
        };
        let cache = ResponseCache::open(&config.cache_dir)?;
        let limiter = Semaphore::new(config.max_in_flight);
        Ok(Self {
            config,
            transport,
            cache,
            cassette,
            key_cursor: AtomicUsize::new(0),
            limiter,
            backend_attempts: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    /// Number of transport calls attempted so far, retries included.
    pub fn backend_attempts(&self) -> u64 {
        self.backend_attempts.load(Ordering::Relaxed)
    }

    /// The gateway's response cache (exposed for maintenance commands).
    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }

    /// Resolve a request according to the configured mode.
    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let fp = fingerprint(request);
        self.complete_inner(request, &fp)
    }

    /// Like [`Gateway::complete`] but consults the persistent response cache
    /// first and stores whatever comes back.
    pub fn cached_complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        request.validate()?;
        let fp = fingerprint(request);
        if let Some(hit) = self.cache.get(&fp) {
            return Ok(hit);
        }
        let response = self.complete_inner(request, &fp)?;
        self.cache.put(&fp, &response)?;
        Ok(response)
    }

    fn complete_inner(
        &self,
        request: &ChatRequest,
        fp: &str,
    ) -> Result<ChatResponse, GatewayError> {
        match self.config.mode {
            GatewayMode::Replay => {
                let cassette = self.lock_cassette();
                match cassette.get(fp) {
                    Some(record) => Ok(record.to_response()),
                    None => Err(GatewayError::MissingRecording {
                        fingerprint: fp.to_string(),
                    }),
                }
            }
            GatewayMode::Record => {
                if let Some(record) = self.lock_cassette().get(fp) {
                    return Ok(record.to_response());
                }
                let response = self.live_call(request)?;
                self.lock_cassette()
                    .append(CassetteRecord::from_response(fp, &response))?;
                Ok(response)
            }
            GatewayMode::Live => self.live_call(request),
        }
    }

    fn lock_cassette(&self) -> std::sync::MutexGuard<'_, Cassette> {
        self.cassette
            .as_ref()
            .expect("cassette present in replay/record mode")
            .lock()
            .expect("cassette lock poisoned")
    }

    fn live_call(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        if self.config.api_keys.is_empty() {
            return Err(GatewayError::NoApiKeys);
        }
        let key_index =
            self.key_cursor.fetch_add(1, Ordering::Relaxed) % self.config.api_keys.len();
        let key = &self.config.api_keys[key_index];
        let url = chat_completions_url(&self.config.endpoint_url);
        let body = wire_body(request);

        let _permit = self.limiter.acquire();
        let max_attempts = self.config.retry.max_attempts.max(1);
        let mut last_error = String::new();
        for attempt in 1..=max_attempts {
            self.backend_attempts.fetch_add(1, Ordering::Relaxed);
            match self.transport.post_chat(&url, key.expose(), &body) {
                Ok(raw) if (200..300).contains(&raw.status) => {
                    return parse_chat_body(request, &raw.body);
                }
                Ok(raw) if raw.status == 401 || raw.status == 403 => {
                    return Err(GatewayError::Auth { status: raw.status });
                }
                Ok(raw) if raw.status == 429 || (500..600).contains(&raw.status) => {
                    last_error = format!("HTTP {}", raw.status);
                }
                Ok(raw) => {
                    return Err(GatewayError::UnexpectedStatus {
                        status: raw.status,
                        body: truncate(&raw.body, 200),
                    });
                }
                Err(transport_error) => {
                    last_error = transport_error.to_string();
                }
            }
            if attempt < max_attempts {
                let delay = backoff_delay(self.config.retry.base_backoff, attempt);
                log::debug!("attempt {attempt} failed ({last_error}); retrying in {delay:?}");
                std::thread::sleep(delay);
            }
        }
        Err(GatewayError::ExhaustedRetries {
            attempts: max_attempts,
            last_error,
        })
    }
}

/// Exponential backoff with ±20% jitter: base × 2^(attempt−1) × U(0.8, 1.2).
fn backoff_delay(base: Duration, attempt: u32) -> Duration {
    let doubled = base.as_secs_f64() * f64::from(2u32.saturating_pow(attempt - 1));
    let jitter = rand::thread_rng().gen_range(0.8..=1.2);
    Duration::from_secs_f64(doubled * jitter)
}

fn truncate(text: &str, limit: usize) -> String {
    if text.len() <= limit {
        return text.to_string();
    }
    let mut end = limit;
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}…", &text[..end])
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'static str,
    content: &'a str,
}

fn wire_body(request: &ChatRequest) -> String {
    let wire = WireRequest {
        model: &request.model_id,
        messages: request
            .messages
            .iter()
            .map(|m| WireMessage {
                role: m.role.wire_name(),
                content: &m.content,
            })
            .collect(),
        temperature: request.temperature,
    };
    serde_json::to_string(&wire).expect("wire request serializes")
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
    model: Option<String>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireResponseMessage,
}

#[derive(Deserialize)]
struct WireResponseMessage {
    content: String,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

/// Rough token count when the provider omits usage: ceil(characters / 4).
pub fn approximate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

fn parse_chat_body(request: &ChatRequest, body: &str) -> Result<ChatResponse, GatewayError> {
    let wire: WireResponse = serde_json::from_str(body)
        .map_err(|e| GatewayError::Protocol(format!("unparseable response body: {e}")))?;
    let choice = wire
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| GatewayError::Protocol("response contained no choices".into()))?;
    let text = choice.message.content;
    let (prompt_tokens, completion_tokens) = match wire.usage {
        Some(usage) => (usage.prompt_tokens, usage.completion_tokens),
        None => {
            let prompt_chars: u64 = request
                .messages
                .iter()
                .map(|m| approximate_tokens(&m.content))
                .sum();
            (prompt_chars, approximate_tokens(&text))
        }
    };
    Ok(ChatResponse {
        text,
        prompt_tokens,
        completion_tokens,
        model_id: wire.model.unwrap_or_else(|| request.model_id.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    /// Transport that replays a script and records every key it was handed.
    struct ScriptedTransport {
        script: Mutex<VecDeque<Result<RawResponse, TransportError>>>,
        keys_seen: std::sync::Arc<Mutex<Vec<String>>>,
    }

    impl ScriptedTransport {
        fn new(script: Vec<Result<RawResponse, TransportError>>) -> Self {
            Self {
                script: Mutex::new(script.into()),
                keys_seen: std::sync::Arc::new(Mutex::new(Vec::new())),
            }
        }

        /// Handle that stays valid after the transport moves into a gateway.
        fn keys_handle(&self) -> std::sync::Arc<Mutex<Vec<String>>> {
            std::sync::Arc::clone(&self.keys_seen)
        }
    }

    impl Transport for ScriptedTransport {
        fn post_chat(
            &self,
            _url: &str,
            api_key: &str,
            _body_json: &str,
        ) -> Result<RawResponse, TransportError> {
            self.keys_seen.lock().unwrap().push(api_key.to_string());
            self.script
                .lock()
                .unwrap()
                .pop_front()
                .unwrap_or_else(|| Err(TransportError::Other("script exhausted".into())))
        }
    }

    fn ok_body(text: &str) -> String {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": text}}],
            "usage": {"prompt_tokens": 10, "completion_tokens": 5, "total_tokens": 15},
            "model": "stub-model",
        })
        .to_string()
    }

    fn ok(text: &str) -> Result<RawResponse, TransportError> {
        Ok(RawResponse {
            status: 200,
            body: ok_body(text),
        })
    }

    fn status(code: u16) -> Result<RawResponse, TransportError> {
        Ok(RawResponse {
            status: code,
            body: format!("{{\"error\":\"status {code}\"}}"),
        })
    }

    fn fast_config(dir: &std::path::Path) -> GatewayConfig {
        GatewayConfig {
            endpoint_url: "http://stub.invalid/v1".into(),
            api_keys: vec![ApiKey::new("k1")],
            max_in_flight: 4,
            retry: RetryPolicy {
                max_attempts: 5,
                base_backoff: Duration::from_millis(1),
            },
            cache_dir: dir.join("cache"),
            mode: GatewayMode::Live,
            cassette_path: None,
            timeout: Duration::from_secs(5),
        }
    }

    fn gateway(
        dir: &std::path::Path,
        script: Vec<Result<RawResponse, TransportError>>,
    ) -> Gateway {
        Gateway::with_transport(fast_config(dir), Box::new(ScriptedTransport::new(script)))
            .unwrap()
    }

    #[test]
    fn transient_failures_are_retried_until_success() {
        let dir = tempfile::tempdir().unwrap();
        let gw = gateway(
            dir.path(),
            vec![
                status(429),
                status(503),
                Err(TransportError::Timeout),
                ok("finally"),
            ],
        );
        let response = gw.complete(&ChatRequest::user("m", "hi")).unwrap();
        assert_eq!(response.text, "finally");
        assert_eq!(response.prompt_tokens, 10);
        assert_eq!(response.model_id, "stub-model");
        assert_eq!(gw.backend_attempts(), 4);
    }

    #[test]
    fn auth_errors_are_not_retried() {
        let dir = tempfile::tempdir().unwrap();
        for code in [401, 403] {
            let gw = gateway(dir.path(), vec![status(code), ok("never")]);
            let err = gw.complete(&ChatRequest::user("m", "hi")).unwrap_err();
            assert!(matches!(err, GatewayError::Auth { status } if status == code));
            assert_eq!(gw.backend_attempts(), 1);
        }
    }

    #[test]
    fn other_4xx_is_not_retried() {
        let dir = tempfile::tempdir().unwrap();
        let gw = gateway(dir.path(), vec![status(404), ok("never")]);
        let err = gw.complete(&ChatRequest::user("m", "hi")).unwrap_err();
        assert!(matches!(
            err,
            GatewayError::UnexpectedStatus { status: 404, .. }
        ));
        assert_eq!(gw.backend_attempts(), 1);
    }

    #[test]
    fn retries_exhaust_after_max_attempts() {
        let dir = tempfile::tempdir().unwrap();
        let gw = gateway(dir.path(), vec![status(429); 8]);
        let err = gw.complete(&ChatRequest::user("m", "hi")).unwrap_err();
        match err {
            GatewayError::ExhaustedRetries {
                attempts,
                last_error,
            } => {
                assert_eq!(attempts, 5);
                assert_eq!(last_error, "HTTP 429");
            }
            other => panic!("expected ExhaustedRetries, got {other:?}"),
        }
        assert_eq!(gw.backend_attempts(), 5);
    }

    #[test]
    fn garbage_success_body_is_a_protocol_error_without_retry() {
        let dir = tempfile::tempdir().unwrap();
        let gw = gateway(
            dir.path(),
            vec![Ok(RawResponse {
                status: 200,
                body: "not json".into(),
            })],
        );
        let err = gw.complete(&ChatRequest::user("m", "hi")).unwrap_err();
        assert!(matches!(err, GatewayError::Protocol(_)));
        assert_eq!(gw.backend_attempts(), 1);
    }

    #[test]
    fn keys_rotate_round_robin() {
        let dir = tempfile::tempdir().unwrap();
        let transport = ScriptedTransport::new((0..9).map(|i| ok(&format!("r{i}"))).collect());
        let keys_seen = transport.keys_handle();
        let mut config = fast_config(dir.path());
        config.api_keys = vec![ApiKey::new("k1"), ApiKey::new("k2"), ApiKey::new("k3")];
        let gw = Gateway::with_transport(config, Box::new(transport)).unwrap();
        for i in 0..9 {
            gw.complete(&ChatRequest::user("m", &format!("q{i}"))).unwrap();
        }
        assert_eq!(
            *keys_seen.lock().unwrap(),
            vec!["k1", "k2", "k3", "k1", "k2", "k3", "k1", "k2", "k3"]
        );
    }

    #[test]
    fn empty_messages_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let gw = gateway(dir.path(), vec![]);
        let request = ChatRequest {
            model_id: "m".into(),
            messages: vec![],
            temperature: 0.0,
        };
        assert!(matches!(
            gw.complete(&request),
            Err(GatewayError::EmptyMessages)
        ));
    }

    #[test]
    fn live_mode_without_keys_fails() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = fast_config(dir.path());
        config.api_keys.clear();
        let gw =
            Gateway::with_transport(config, Box::new(ScriptedTransport::new(vec![]))).unwrap();
        assert!(matches!(
            gw.complete(&ChatRequest::user("m", "hi")),
            Err(GatewayError::NoApiKeys)
        ));
    }

    #[test]
    fn replay_mode_requires_cassette_path() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = fast_config(dir.path());
        config.mode = GatewayMode::Replay;
        let err = Gateway::with_transport(config, Box::new(ScriptedTransport::new(vec![])))
            .unwrap_err();
        assert!(matches!(err, GatewayError::CassetteRequired { .. }));
    }

    #[test]
    fn replay_hits_cassette_and_never_touches_network() {
        let dir = tempfile::tempdir().unwrap();
        let cassette_path = dir.path().join("run.jsonl");
        let request = ChatRequest::user("m", "known question");
        let fp = fingerprint(&request);
        {
            let mut cassette = Cassette::load(&cassette_path).unwrap();
            cassette
                .append(CassetteRecord {
                    fingerprint: fp,
                    response_text: "stored answer".into(),
                    prompt_tokens: 12,
                    completion_tokens: 4,
                    model_id: "m".into(),
                })
                .unwrap();
        }
        let mut config = fast_config(dir.path());
        config.mode = GatewayMode::Replay;
        config.cassette_path = Some(cassette_path);
        config.api_keys.clear(); // replay needs no credentials
        let gw =
            Gateway::with_transport(config, Box::new(ScriptedTransport::new(vec![]))).unwrap();

        let response = gw.complete(&request).unwrap();
        assert_eq!(response.text, "stored answer");
        assert_eq!(response.total_tokens(), 16);
        assert_eq!(gw.backend_attempts(), 0);

        let unknown = ChatRequest::user("m", "never recorded");
        assert!(matches!(
            gw.complete(&unknown),
            Err(GatewayError::MissingRecording { .. })
        ));
        assert_eq!(gw.backend_attempts(), 0);
    }

    #[test]
    fn record_mode_records_once_then_replays() {
        let dir = tempfile::tempdir().unwrap();
        let cassette_path = dir.path().join("run.jsonl");
        let request = ChatRequest::user("m", "question");
        let mut config = fast_config(dir.path());
        config.mode = GatewayMode::Record;
        config.cassette_path = Some(cassette_path.clone());
        let gw = Gateway::with_transport(
            config,
            Box::new(ScriptedTransport::new(vec![ok("live answer")])),
        )
        .unwrap();

        assert_eq!(gw.complete(&request).unwrap().text, "live answer");
        assert_eq!(gw.complete(&request).unwrap().text, "live answer");
        assert_eq!(gw.backend_attempts(), 1, "second call must hit the cassette");

        // a fresh replay-mode gateway sees the recording
        let mut replay_config = fast_config(dir.path());
        replay_config.mode = GatewayMode::Replay;
        replay_config.cassette_path = Some(cassette_path);
        replay_config.api_keys.clear();
        let replay =
            Gateway::with_transport(replay_config, Box::new(ScriptedTransport::new(vec![])))
                .unwrap();
        assert_eq!(replay.complete(&request).unwrap().text, "live answer");
        assert_eq!(replay.backend_attempts(), 0);
    }

    #[test]
    fn cached_complete_avoids_repeat_backend_calls() {
        let dir = tempfile::tempdir().unwrap();
        let gw = gateway(dir.path(), vec![ok("answer one"), ok("answer two")]);
        let request = ChatRequest::user("m", "same question");
        assert_eq!(gw.cached_complete(&request).unwrap().text, "answer one");
        assert_eq!(gw.cached_complete(&request).unwrap().text, "answer one");
        assert_eq!(gw.backend_attempts(), 1);

        // a different temperature is a different fingerprint → new call
        let mut warm = request.clone();
        warm.temperature = 0.5;
        assert_eq!(gw.cached_complete(&warm).unwrap().text, "answer two");
        assert_eq!(gw.backend_attempts(), 2);
    }

    #[test]
    fn cache_survives_gateway_restarts() {
        let dir = tempfile::tempdir().unwrap();
        let requests: Vec<ChatRequest> = (0..5)
            .map(|i| ChatRequest::user("m", &format!("question {i}")))
            .collect();
        let gw = gateway(dir.path(), (0..5).map(|i| ok(&format!("a{i}"))).collect());
        for request in &requests {
            gw.cached_complete(request).unwrap();
        }
        assert_eq!(gw.backend_attempts(), 5);

        // same cache dir, fresh gateway with an empty script: all hits
        let rerun = gateway(dir.path(), vec![]);
        for (i, request) in requests.iter().enumerate() {
            assert_eq!(rerun.cached_complete(request).unwrap().text, format!("a{i}"));
        }
        assert_eq!(rerun.backend_attempts(), 0);
    }

    #[test]
    fn concurrency_never_exceeds_max_in_flight() {
        use std::sync::atomic::AtomicI64;
        use std::sync::Arc;

        /// Transport that tracks its own concurrent occupancy.
        struct GaugeTransport {
            in_flight: Arc<AtomicI64>,
            max_seen: Arc<AtomicI64>,
        }

        impl Transport for GaugeTransport {
            fn post_chat(
                &self,
                _url: &str,
                _key: &str,
                _body: &str,
            ) -> Result<RawResponse, TransportError> {
                let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
                self.max_seen.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(5));
                self.in_flight.fetch_sub(1, Ordering::SeqCst);
                Ok(RawResponse {
                    status: 200,
                    body: serde_json::json!({
                        "choices": [{"message": {"content": "ok"}}],
                        "usage": {"prompt_tokens": 1, "completion_tokens": 1},
                    })
                    .to_string(),
                })
            }
        }

        let max_seen = Arc::new(AtomicI64::new(0));
        let dir = tempfile::tempdir().unwrap();
        let mut config = fast_config(dir.path());
        config.max_in_flight = 2;
        let gw = Arc::new(
            Gateway::with_transport(
                config,
                Box::new(GaugeTransport {
                    in_flight: Arc::new(AtomicI64::new(0)),
                    max_seen: Arc::clone(&max_seen),
                }),
            )
            .unwrap(),
        );

        std::thread::scope(|scope| {
            for i in 0..8 {
                let gw = Arc::clone(&gw);
                scope.spawn(move || {
                    gw.complete(&ChatRequest::user("m", &format!("q{i}"))).unwrap();
                });
            }
        });
        assert_eq!(gw.backend_attempts(), 8);
        let observed = max_seen.load(Ordering::SeqCst);
        assert!(observed >= 1, "stub transport never ran");
        assert!(
            observed <= 2,
            "observed {observed} concurrent calls with max_in_flight = 2"
        );
    }

    #[test]
    fn missing_usage_falls_back_to_character_approximation() {
        let dir = tempfile::tempdir().unwrap();
        let body = serde_json::json!({
            "choices": [{"message": {"content": "twelve chars"}}],
        })
        .to_string();
        let gw = gateway(dir.path(), vec![Ok(RawResponse { status: 200, body })]);
        // prompt "abcdefgh" = 8 chars → 2 tokens; response 12 chars → 3 tokens
        let response = gw.complete(&ChatRequest::user("m", "abcdefgh")).unwrap();
        assert_eq!(response.prompt_tokens, 2);
        assert_eq!(response.completion_tokens, 3);
        assert_eq!(response.model_id, "m", "falls back to the request model");
    }

    #[test]
    fn api_keys_are_redacted_in_debug_output() {
        let key = ApiKey::new("sk-super-secret-value");
        let debugged = format!("{key:?}");
        assert!(!debugged.contains("super-secret"));
        assert_eq!(debugged, "ApiKey(****)");

        let config = GatewayConfig {
            api_keys: vec![ApiKey::new("sk-another-secret")],
            ..GatewayConfig::default()
        };
        assert!(!format!("{config:?}").contains("another-secret"));
    }

    #[test]
    fn token_approximation_rounds_up() {
        assert_eq!(approximate_tokens(""), 0);
        assert_eq!(approximate_tokens("abc"), 1);
        assert_eq!(approximate_tokens("abcd"), 1);
        assert_eq!(approximate_tokens("abcde"), 2);
    }
}
