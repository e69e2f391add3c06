//! Uniform boundary to the language model.
//!
//! Three backends sit behind one `complete` call: a live HTTP completions
//! API, deterministic mocks for tests, and record/replay over a trace store
//! so full pipeline runs are reproducible offline. The trace store is a
//! JSON-lines file keyed by a stable digest of each request.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("gateway HTTP error: status {status}: {body}")]
    Http { status: u16, body: String },
    #[error("gateway transport error: {0}")]
    Transport(String),
    #[error("gateway request timed out")]
    Timeout,
    #[error("no recorded completion for digest {digest} ({template})")]
    ReplayMiss { digest: String, template: String },
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),
    #[error("prompt text is empty")]
    EmptyPrompt,
    #[error("trace store write failed: {0}")]
    StoreWrite(#[from] std::io::Error),
    #[error("trace store line {line} is not a valid record: {message}")]
    StoreFormat { line: usize, message: String },
    #[error("digest {digest} already recorded with a different completion")]
    DigestConflict { digest: String },
}

/// Which prompt template produced a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    Simplify,
    InitialSql,
    ReviseSql,
    ExplainSql,
}

impl TemplateId {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::Simplify => "simplify",
            TemplateId::InitialSql => "initial_sql",
            TemplateId::ReviseSql => "revise_sql",
            TemplateId::ExplainSql => "explain_sql",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One fully rendered model request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub template_id: TemplateId,
    pub rendered_text: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl PromptRequest {
    /// Stable hex digest of (template_id, temperature, rendered_text).
    ///
    /// The preimage uses the shortest round-trip decimal form of the
    /// temperature, so the digest is identical across platforms and runs.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.template_id.as_str().as_bytes());
        hasher.update(b"\n");
        hasher.update(format!("{:?}", self.temperature).as_bytes());
        hasher.update(b"\n");
        hasher.update(self.rendered_text.as_bytes());
        let out = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in out {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }
}

/// Per-template sampling settings. Defaults: temperature 1.0 for
/// simplification, 0.5 for SQL generation and explanation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationParams {
    pub temperature_simplify: f64,
    pub temperature_sql: f64,
    pub max_tokens_simplify: u32,
    pub max_tokens_sql: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature_simplify: 1.0,
            temperature_sql: 0.5,
            max_tokens_simplify: 256,
            max_tokens_sql: 512,
        }
    }
}

impl GenerationParams {
    pub fn request(&self, template_id: TemplateId, rendered_text: String) -> PromptRequest {
        let (temperature, max_tokens) = match template_id {
            TemplateId::Simplify => (self.temperature_simplify, self.max_tokens_simplify),
            TemplateId::InitialSql | TemplateId::ReviseSql | TemplateId::ExplainSql => {
                (self.temperature_sql, self.max_tokens_sql)
            }
        };
        PromptRequest {
            template_id,
            rendered_text,
            temperature,
            max_tokens,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Live,
    Mock,
    Replay,
}

/// A model completion, exactly as the backend returned it.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub backend: BackendKind,
    pub latency: Duration,
}

/// One line of the trace store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub digest: String,
    pub template_id: TemplateId,
    pub temperature: f64,
    pub prompt: String,
    pub completion: String,
}

/// Read-only replay index over a trace file.
pub struct TraceStore {
    records: HashMap<String, TraceRecord>,
}

impl TraceStore {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut records = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TraceRecord =
                serde_json::from_str(&line).map_err(|e| GatewayError::StoreFormat {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            if let Some(existing) = records.get(&record.digest) {
                let existing: &TraceRecord = existing;
                if existing.completion != record.completion {
                    return Err(GatewayError::DigestConflict {
                        digest: record.digest,
                    });
                }
                continue;
            }
            records.insert(record.digest.clone(), record);
        }
        Ok(TraceStore { records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn lookup(&self, digest: &str) -> Option<&TraceRecord> {
        self.records.get(digest)
    }
}

struct TraceWriterInner {
    file: std::io::BufWriter<std::fs::File>,
    index: HashMap<String, String>,
}

/// Append-only trace recorder. Reopening an existing file keeps its records
/// so recording is idempotent across runs.
pub struct TraceWriter {
    path: PathBuf,
    inner: Mutex<TraceWriterInner>,
}

impl TraceWriter {
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        let mut index = HashMap::new();
        if path.exists() {
            let store = TraceStore::load(path)?;
            for (digest, record) in store.records {
                index.insert(digest, record.completion);
            }
        }
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        Ok(TraceWriter {
            path: path.to_path_buf(),
            inner: Mutex::new(TraceWriterInner {
                file: std::io::BufWriter::new(file),
                index,
            }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one record; recording an identical (request, completion)
    /// pair again is a no-op, a different completion for a known digest is
    /// an error.
    pub fn record(
        &self,
        request: &PromptRequest,
        completion_text: &str,
    ) -> Result<TraceRecord, GatewayError> {
        let digest = request.digest();
        let record = TraceRecord {
            digest: digest.clone(),
            template_id: request.template_id,
            temperature: request.temperature,
            prompt: request.rendered_text.clone(),
            completion: completion_text.to_string(),
        };
        let mut inner = self.inner.lock().expect("trace writer poisoned");
        if let Some(existing) = inner.index.get(&digest) {
            if existing == completion_text {
                return Ok(record);
            }
            return Err(GatewayError::DigestConflict { digest });
        }
        let line = serde_json::to_string(&record).expect("trace record serializes");
        inner.file.write_all(line.as_bytes())?;
        inner.file.write_all(b"\n")?;
        inner.file.flush()?;
        inner.index.insert(digest, completion_text.to_string());
        Ok(record)
    }
}

/// Settings for the live HTTP completions backend.
#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub base_url: String,
    pub api_key: String,
    pub model: String,
    pub timeout: Duration,
    /// Attempts on transport errors only; application errors never retry.
    pub max_attempts: u32,
}

struct LiveBackend {
    config: LiveConfig,
    client: reqwest::blocking::Client,
}

impl LiveBackend {
    fn new(config: LiveConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        Ok(LiveBackend { config, client })
    }

    fn complete(&self, request: &PromptRequest) -> Result<String, GatewayError> {
        let url = format!(
            "{}/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let body = serde_json::json!({
            "model": self.config.model,
            "prompt": request.rendered_text,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });

        let mut last_error = GatewayError::Transport("no attempt made".to_string());
        for attempt in 0..self.config.max_attempts.max(1) {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(250 << (attempt - 1)));
            }
            let sent = self
                .client
                .post(&url)
                .bearer_auth(&self.config.api_key)
                .json(&body)
                .send();
            match sent {
                Err(e) if e.is_timeout() => last_error = GatewayError::Timeout,
                Err(e) => last_error = GatewayError::Transport(e.to_string()),
                Ok(response) => {
                    let status = response.status();
                    let text = response.text().unwrap_or_default();
                    if !status.is_success() {
                        let mut body = text;
                        body.truncate(500);
                        return Err(GatewayError::Http {
                            status: status.as_u16(),
                            body,
                        });
                    }
                    return extract_completion_text(&text);
                }
            }
        }
        Err(last_error)
    }
}

/// Pulls the completion string out of a completions-or-chat style response.
fn extract_completion_text(body: &str) -> Result<String, GatewayError> {
    let value: serde_json::Value = serde_json::from_str(body)
        .map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
    let choice = value
        .get("choices")
        .and_then(|c| c.get(0))
        .ok_or_else(|| GatewayError::MalformedResponse("no choices in response".to_string()))?;
    if let Some(text) = choice.get("text").and_then(|t| t.as_str()) {
        return Ok(text.to_string());
    }
    if let Some(text) = choice
        .get("message")
        .and_then(|m| m.get("content"))
        .and_then(|t| t.as_str())
    {
        return Ok(text.to_string());
    }
    Err(GatewayError::MalformedResponse(
        "choice carries neither text nor message.content".to_string(),
    ))
}

type MockFn = Box<dyn Fn(&PromptRequest) -> String + Send + Sync>;

enum Backend {
    Mock(MockFn),
    Replay(TraceStore),
    Live(Box<LiveBackend>),
}

/// The language-model handle shared by the whole pipeline.
pub struct Gateway {
    backend: Backend,
    recorder: Option<TraceWriter>,
    captured: Option<Mutex<Vec<PromptRequest>>>,
}

impl Gateway {
    /// Mock that returns the rendered prompt unchanged.
    pub fn mock_echo() -> Self {
        Self::mock_fn(|req| req.rendered_text.clone())
    }

    /// Mock that returns the same text for every request.
    pub fn mock_fixed(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::mock_fn(move |_| text.clone())
    }

    /// Mock driven by an arbitrary pure-ish function of the request.
    pub fn mock_fn(f: impl Fn(&PromptRequest) -> String + Send + Sync + 'static) -> Self {
        Gateway {
            backend: Backend::Mock(Box::new(f)),
            recorder: None,
            captured: None,
        }
    }

    /// Echo mock with request capture enabled, for assertions on traffic.
    pub fn mock_recording_echo() -> Self {
        Self::mock_echo().capturing_requests()
    }

    pub fn replay(store: TraceStore) -> Self {
        Gateway {
            backend: Backend::Replay(store),
            recorder: None,
            captured: None,
        }
    }

    pub fn live(config: LiveConfig) -> Result<Self, GatewayError> {
        Ok(Gateway {
            backend: Backend::Live(Box::new(LiveBackend::new(config)?)),
            recorder: None,
            captured: None,
        })
    }

    /// Records every (request, completion) pair into `writer`.
    pub fn with_recorder(mut self, writer: TraceWriter) -> Self {
        self.recorder = Some(writer);
        self
    }

    /// Keeps every request in memory for later inspection (tests).
    pub fn capturing_requests(mut self) -> Self {
        self.captured = Some(Mutex::new(Vec::new()));
        self
    }

    pub fn recorded_requests(&self) -> Vec<PromptRequest> {
        self.captured
            .as_ref()
            .map(|m| m.lock().expect("capture poisoned").clone())
            .unwrap_or_default()
    }

    pub fn backend_kind(&self) -> BackendKind {
        match self.backend {
            Backend::Mock(_) => BackendKind::Mock,
            Backend::Replay(_) => BackendKind::Replay,
            Backend::Live(_) => BackendKind::Live,
        }
    }

    pub fn complete(&self, request: &PromptRequest) -> Result<Completion, GatewayError> {
        if request.rendered_text.is_empty() {
            return Err(GatewayError::EmptyPrompt);
        }
        if let Some(captured) = &self.captured {
            captured
                .lock()
                .expect("capture poisoned")
                .push(request.clone());
        }
        let start = Instant::now();
        let text = match &self.backend {
            Backend::Mock(f) => f(request),
            Backend::Replay(store) => {
                let digest = request.digest();
                match store.lookup(&digest) {
                    Some(record) => record.completion.clone(),
                    None => {
                        return Err(GatewayError::ReplayMiss {
                            digest,
                            template: request.template_id.as_str().to_string(),
                        })
                    }
                }
            }
            Backend::Live(live) => live.complete(request)?,
        };
        let completion = Completion {
            text,
            backend: self.backend_kind(),
            latency: start.elapsed(),
        };
        if let Some(recorder) = &self.recorder {
            recorder.record(request, &completion.text)?;
        }
        Ok(completion)
    }
}
