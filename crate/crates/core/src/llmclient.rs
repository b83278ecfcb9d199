// Copyright 2026 The Tripartite Authors
// SPDX-License-Identifier: Apache-2.0

//! Chat-completion and embedding backends.
//!
//! Three families implement [`ChatBackend`] and [`EmbedderBackend`]:
//!
//! - [`HttpClient`] speaks the common `POST {base}/chat/completions` and
//!   `POST {base}/embeddings` JSON shapes, with retry and an in-flight bound.
//! - [`MockEmbedder`] and [`MockChat`] are deterministic and offline.
//! - [`ReplayBackend`] answers from a JSON-lines fixture keyed by request
//!   digest; [`Recorder`] writes such fixtures from a live backend.
//!
//! Retry and concurrency limits live here, not in callers.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::text::{fnv1a64, tokens};

pub const ENV_API_KEY: &str = "LLM_API_KEY";
pub const ENV_BASE_URL: &str = "LLM_BASE_URL";
pub const MOCK_EMBEDDING_DIM: usize = 64;

#[derive(Debug, Clone, thiserror::Error)]
pub enum BackendError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("HTTP status {code}: {body}")]
    HttpStatus { code: u16, body: String },
    #[error("malformed response body: {0}")]
    MalformedBody(String),
    #[error("embedding dimension changed from {expected} to {found}")]
    DimensionDrift { expected: usize, found: usize },
    #[error("text has no embeddable content")]
    ZeroVector,
    #[error("no recorded response for request digest {0}")]
    ReplayMiss(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

impl BackendError {
    /// Transport failures, rate limiting and server errors are worth retrying.
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport(_) => true,
            BackendError::HttpStatus { code, .. } => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

pub trait ChatBackend: Send + Sync {
    /// One system + one user message in, assistant text out.
    fn chat(&self, system: &str, user: &str) -> Result<String, BackendError>;
}

pub trait EmbedderBackend: Send + Sync {
    /// Output dimension. Constant for the lifetime of the backend.
    fn dimension(&self) -> Result<usize, BackendError>;
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError>;
}

/// API key wrapper that never prints its contents.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Secret(***)")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub base_url: String,
    #[serde(skip)]
    pub api_key: Secret,
    pub model_chat: String,
    pub model_embed: String,
    pub timeout_s: f64,
    /// Maximum number of attempts per request, including the first.
    pub max_retries: u32,
    pub max_in_flight: usize,
    /// First backoff delay; doubles on every retry.
    pub retry_base_ms: u64,
    /// Expected embedding dimension. Probed on first use when unset.
    pub embedding_dim: Option<usize>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            base_url: String::new(),
            api_key: Secret::default(),
            model_chat: "gpt-4o-mini".into(),
            model_embed: "text-embedding-3-small".into(),
            timeout_s: 60.0,
            max_retries: 3,
            max_in_flight: 4,
            retry_base_ms: 500,
            embedding_dim: None,
        }
    }
}

impl BackendConfig {
    /// Applies `LLM_API_KEY` / `LLM_BASE_URL` from the environment.
    pub fn with_env(mut self) -> Self {
        if let Ok(key) = std::env::var(ENV_API_KEY) {
            self.api_key = Secret::new(key);
        }
        if let Ok(url) = std::env::var(ENV_BASE_URL) {
            self.base_url = url;
        }
        self
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.base_url.trim().is_empty() {
            return Err(BackendError::Config("base_url is empty".into()));
        }
        if self.max_in_flight == 0 {
            return Err(BackendError::Config("max_in_flight must be positive".into()));
        }
        if self.timeout_s.is_nan() || self.timeout_s <= 0.0 {
            return Err(BackendError::Config("timeout_s must be positive".into()));
        }
        Ok(())
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
pub struct InFlightLimiter {
    available: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a>(&'a InFlightLimiter);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap() += 1;
        self.0.freed.notify_one();
    }
}

impl InFlightLimiter {
    pub fn new(limit: usize) -> Self {
        Self {
            available: Mutex::new(limit.max(1)),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut available = self.available.lock().unwrap();
        while *available == 0 {
            available = self.freed.wait(available).unwrap();
        }
        *available -= 1;
        Permit(self)
    }
}

/// Runs `op` up to `attempts` times with exponential backoff on retryable
/// errors. Exhausted retries surface as [`BackendError::Transport`].
pub fn with_retry<T>(
    attempts: u32,
    base_delay: Duration,
    mut op: impl FnMut() -> Result<T, BackendError>,
) -> Result<T, BackendError> {
    let attempts = attempts.max(1);
    let mut delay = base_delay;
    let mut last = None;
    for attempt in 1..=attempts {
        match op() {
            Ok(v) => return Ok(v),
            Err(e) if e.is_retryable() => {
                last = Some(e);
                if attempt < attempts {
                    std::thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
            }
            Err(e) => return Err(e),
        }
    }
    Err(BackendError::Transport(format!(
        "giving up after {attempts} attempts: {}",
        last.expect("at least one attempt")
    )))
}

pub struct HttpClient {
    config: BackendConfig,
    agent: ureq::Agent,
    limiter: InFlightLimiter,
    dim: OnceLock<usize>,
}

impl HttpClient {
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s)))
            .http_status_as_error(false)
            .build()
            .into();
        let dim = OnceLock::new();
        if let Some(d) = config.embedding_dim {
            let _ = dim.set(d);
        }
        Ok(Self {
            limiter: InFlightLimiter::new(config.max_in_flight),
            config,
            agent,
            dim,
        })
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let url = format!("{}/{path}", self.config.base_url.trim_end_matches('/'));
        let payload = body.to_string();
        with_retry(
            self.config.max_retries,
            Duration::from_millis(self.config.retry_base_ms),
            || {
                let _permit = self.limiter.acquire();
                let mut request = self.agent.post(&url).header("Content-Type", "application/json");
                if !self.config.api_key.is_empty() {
                    request = request.header(
                        "Authorization",
                        &format!("Bearer {}", self.config.api_key.expose()),
                    );
                }
                let mut response = request
                    .send(payload.as_str())
                    .map_err(|e| BackendError::Transport(e.to_string()))?;
                let code = response.status().as_u16();
                let text = response
                    .body_mut()
                    .read_to_string()
                    .map_err(|e| BackendError::Transport(e.to_string()))?;
                if !(200..300).contains(&code) {
                    let mut body = text;
                    body.truncate(512);
                    return Err(BackendError::HttpStatus { code, body });
                }
                serde_json::from_str(&text).map_err(|e| BackendError::MalformedBody(e.to_string()))
            },
        )
    }
}

pub fn chat_request(model: &str, system: &str, user: &str) -> Value {
    json!({
        "model": model,
        "temperature": 0,
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ],
    })
}

pub fn embed_request(model: &str, text: &str) -> Value {
    json!({"model": model, "input": text})
}

pub fn parse_chat_response(body: &Value) -> Result<String, BackendError> {
    body.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::MalformedBody("missing choices[0].message.content".into()))
}

pub fn parse_embed_response(body: &Value) -> Result<Vec<f64>, BackendError> {
    let values = body
        .pointer("/data/0/embedding")
        .and_then(Value::as_array)
        .ok_or_else(|| BackendError::MalformedBody("missing data[0].embedding".into()))?;
    values
        .iter()
        .map(|v| {
            v.as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| BackendError::MalformedBody("non-numeric embedding value".into()))
        })
        .collect()
}

impl ChatBackend for HttpClient {
    fn chat(&self, system: &str, user: &str) -> Result<String, BackendError> {
        let body = self.post(
            "chat/completions",
            &chat_request(&self.config.model_chat, system, user),
        )?;
        parse_chat_response(&body)
    }
}

impl EmbedderBackend for HttpClient {
    fn dimension(&self) -> Result<usize, BackendError> {
        if let Some(d) = self.dim.get() {
            return Ok(*d);
        }
        Ok(self.embed("dimension probe")?.len())
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        let body = self.post("embeddings", &embed_request(&self.config.model_embed, text))?;
        let v = parse_embed_response(&body)?;
        let expected = *self.dim.get_or_init(|| v.len());
        if v.len() != expected {
            return Err(BackendError::DimensionDrift {
                expected,
                found: v.len(),
            });
        }
        Ok(v)
    }
}

/// Deterministic bag-of-words embedder: signed feature hashing of
/// lowercased alphanumeric tokens into `dim` buckets, then L2
/// normalisation.
///
/// Distinct token sets collide only when every bucket sum coincides, which
/// at 64 buckets is rare for texts of more than a few tokens; identical
/// texts always give identical vectors.
#[derive(Debug, Clone, Copy)]
pub struct MockEmbedder {
    dim: usize,
}

impl Default for MockEmbedder {
    fn default() -> Self {
        Self {
            dim: MOCK_EMBEDDING_DIM,
        }
    }
}

impl MockEmbedder {
    pub fn new(dim: usize) -> Self {
        Self { dim: dim.max(1) }
    }
}

impl EmbedderBackend for MockEmbedder {
    fn dimension(&self) -> Result<usize, BackendError> {
        Ok(self.dim)
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        let mut v = vec![0.0f64; self.dim];
        for token in tokens(text) {
            let h = fnv1a64(token.as_bytes());
            let bucket = (h % self.dim as u64) as usize;
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            v[bucket] += sign;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(BackendError::ZeroVector);
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

/// Chat backend that answers extraction prompts built from the default
/// annotation template with the keyword rule: sentences of the subject
/// text containing any keyword of the named concept, or `NONE`.
#[derive(Debug, Clone, Default)]
pub struct MockChat {
    keywords: BTreeMap<String, Vec<String>>,
}

impl MockChat {
    /// `table` maps concept name → keywords.
    pub fn new(table: BTreeMap<String, Vec<String>>) -> Self {
        Self { keywords: table }
    }

    pub fn from_ontology(ontology: &crate::ontology::Ontology) -> Self {
        Self::new(
            ontology
                .concepts()
                .map(|c| (c.name.clone(), c.keywords.clone()))
                .collect(),
        )
    }
}

impl ChatBackend for MockChat {
    fn chat(&self, _system: &str, user: &str) -> Result<String, BackendError> {
        let concept = user
            .lines()
            .find_map(|l| l.strip_prefix("Concept: "))
            .ok_or_else(|| BackendError::MalformedBody("prompt has no `Concept:` line".into()))?;
        let subject = user
            .split_once("\nText:\n")
            .map(|(_, rest)| rest)
            .ok_or_else(|| BackendError::MalformedBody("prompt has no `Text:` section".into()))?;
        let keywords = self.keywords.get(concept.trim()).map(Vec::as_slice).unwrap_or(&[]);
        Ok(crate::annotate::keyword_extract(keywords, subject).unwrap_or_else(|| "NONE".into()))
    }
}

/// One recorded request/response pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub digest: String,
    pub kind: String,
    pub response: Value,
}

/// SHA-256 over the canonical JSON of a request body.
pub fn request_digest(kind: &str, request: &Value) -> String {
    let canonical = json!({"kind": kind, "request": request}).to_string();
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Answers requests from a recorded fixture file. Never touches the network.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    model_chat: String,
    model_embed: String,
    entries: BTreeMap<String, Value>,
    dim: Option<usize>,
}

impl ReplayBackend {
    pub fn load(path: &Path, config: &BackendConfig) -> Result<Self, BackendError> {
        let file = std::fs::File::open(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        let mut entries = BTreeMap::new();
        let mut dim = None;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| BackendError::Config(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: ReplayEntry = serde_json::from_str(&line)
                .map_err(|e| BackendError::Config(format!("replay line {}: {e}", i + 1)))?;
            if entry.kind == "embed" && dim.is_none() {
                dim = parse_embed_response(&entry.response).ok().map(|v| v.len());
            }
            entries.insert(entry.digest, entry.response);
        }
        Ok(Self {
            model_chat: config.model_chat.clone(),
            model_embed: config.model_embed.clone(),
            entries,
            dim: config.embedding_dim.or(dim),
        })
    }

    fn lookup(&self, kind: &str, request: &Value) -> Result<&Value, BackendError> {
        let digest = request_digest(kind, request);
        self.entries.get(&digest).ok_or(BackendError::ReplayMiss(digest))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl ChatBackend for ReplayBackend {
    fn chat(&self, system: &str, user: &str) -> Result<String, BackendError> {
        parse_chat_response(self.lookup("chat", &chat_request(&self.model_chat, system, user))?)
    }
}

impl EmbedderBackend for ReplayBackend {
    fn dimension(&self) -> Result<usize, BackendError> {
        self.dim
            .ok_or_else(|| BackendError::Config("replay file has no embedding entries".into()))
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        parse_embed_response(self.lookup("embed", &embed_request(&self.model_embed, text))?)
    }
}

/// Wraps a backend and appends every successful exchange to a replay file.
pub struct Recorder<B> {
    inner: B,
    model_chat: String,
    model_embed: String,
    out: Mutex<std::fs::File>,
    path: PathBuf,
}

impl<B> Recorder<B> {
    pub fn new(inner: B, config: &BackendConfig, path: &Path) -> Result<Self, BackendError> {
        let out = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| BackendError::Config(format!("{}: {e}", path.display())))?;
        Ok(Self {
            inner,
            model_chat: config.model_chat.clone(),
            model_embed: config.model_embed.clone(),
            out: Mutex::new(out),
            path: path.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn record(&self, kind: &str, request: &Value, response: Value) -> Result<(), BackendError> {
        let entry = ReplayEntry {
            digest: request_digest(kind, request),
            kind: kind.to_string(),
            response,
        };
        let mut line = serde_json::to_string(&entry).expect("replay entry serializes");
        line.push('\n');
        self.out
            .lock()
            .unwrap()
            .write_all(line.as_bytes())
            .map_err(|e| BackendError::Config(e.to_string()))
    }
}

impl<B: ChatBackend> ChatBackend for Recorder<B> {
    fn chat(&self, system: &str, user: &str) -> Result<String, BackendError> {
        let reply = self.inner.chat(system, user)?;
        let request = chat_request(&self.model_chat, system, user);
        self.record(
            "chat",
            &request,
            json!({"choices": [{"message": {"role": "assistant", "content": reply}}]}),
        )?;
        Ok(reply)
    }
}

impl<B: EmbedderBackend> EmbedderBackend for Recorder<B> {
    fn dimension(&self) -> Result<usize, BackendError> {
        self.inner.dimension()
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        let v = self.inner.embed(text)?;
        let request = embed_request(&self.model_embed, text);
        self.record("embed", &request, json!({"data": [{"embedding": v}]}))?;
        Ok(v)
    }
}
