use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::context::extract_evidence_ids;
use super::parse::{parse_response, ProposedTriple};
use crate::error::{Error, Result};
use crate::graph::ChunkId;

/// Something that answers a completion prompt with raw text.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, prompt: &str) -> Result<String>;
}

/// Answers from a fixed table of triples: a triple is returned when every
/// chunk it cites is among the prompt's evidence.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    table: Vec<ProposedTriple>,
}

impl MockBackend {
    pub fn new(table: Vec<ProposedTriple>) -> Self {
        MockBackend { table }
    }

    /// Reads a table written in the response layout, one triple per line.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed = parse_response(&text);
        if parsed.malformed > 0 {
            return Err(Error::Config(format!(
                "{}: {} malformed line(s) in mock table",
                path.display(),
                parsed.malformed
            )));
        }
        Ok(MockBackend::new(parsed.triples))
    }

    pub fn table(&self) -> &[ProposedTriple] {
        &self.table
    }
}

impl CompletionBackend for MockBackend {
    fn complete(&self, prompt: &str) -> Result<String> {
        let visible: BTreeSet<ChunkId> = extract_evidence_ids(prompt).into_iter().collect();
        let mut out = String::new();
        for t in &self.table {
            if !t.citations.is_empty() && t.citations.is_subset(&visible) {
                let _ = writeln!(out, "{t}");
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HttpBackendConfig {
    /// Base URL; requests go to `{base_url}/chat/completions`.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub max_attempts: u32,
    /// First retry delay; doubled on each further attempt.
    pub backoff_ms: u64,
    pub temperature: f64,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        HttpBackendConfig {
            base_url: "http://localhost:8000/v1".into(),
            model: "default".into(),
            api_key_env: "KGMEND_API_KEY".into(),
            timeout_secs: 120,
            max_attempts: 3,
            backoff_ms: 500,
            temperature: 0.0,
        }
    }
}

/// Chat-completion client with retry on transient failures.
pub struct HttpBackend {
    cfg: HttpBackendConfig,
    token: String,
    client: reqwest::blocking::Client,
}

enum Failure {
    Transient(String),
    Permanent(String),
}

impl HttpBackend {
    /// Reads the token from the configured environment variable.
    pub fn new(cfg: HttpBackendConfig) -> Result<Self> {
        let token = std::env::var(&cfg.api_key_env)
            .map_err(|_| Error::Config(format!("environment variable {} is not set", cfg.api_key_env)))?;
        Self::with_token(cfg, token)
    }

    pub fn with_token(cfg: HttpBackendConfig, token: impl Into<String>) -> Result<Self> {
        if cfg.max_attempts == 0 {
            return Err(Error::Config("backend.max_attempts must be >= 1".into()));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| Error::Backend(e.to_string()))?;
        Ok(HttpBackend {
            cfg,
            token: token.into(),
            client,
        })
    }

    fn attempt(&self, prompt: &str) -> std::result::Result<String, Failure> {
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let body = json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let resp = self
            .client
            .post(&url)
            .bearer_auth(&self.token)
            .json(&body)
            .send()
            .map_err(|e| Failure::Transient(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Failure::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(Failure::Permanent(format!("HTTP {status}")));
        }
        let value: Value = resp.json().map_err(|e| Failure::Permanent(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| Failure::Permanent("response has no choices[0].message.content".into()))
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, prompt: &str) -> Result<String> {
        let mut last = String::new();
        for attempt in 0..self.cfg.max_attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.cfg.backoff_ms << (attempt - 1)));
            }
            match self.attempt(prompt) {
                Ok(text) => return Ok(text),
                Err(Failure::Permanent(msg)) => return Err(Error::Backend(msg)),
                Err(Failure::Transient(msg)) => {
                    log::warn!("completion attempt {} failed: {msg}", attempt + 1);
                    last = msg;
                }
            }
        }
        Err(Error::Backend(format!(
            "giving up after {} attempts: {last}",
            self.cfg.max_attempts
        )))
    }
}
