//! Text embedding providers.
//!
//! Entity labels and chunk texts are embedded into one shared space so that a
//! single input projection serves every node type.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DEFAULT_MOCK_DIM: usize = 64;

pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;

    /// Raw embedding of `text`; callers should go through [`embed_text`].
    fn embed_raw(&self, text: &str) -> Result<Vec<f64>>;
}

/// Embed `text` with `provider`, checking the dimension and unit-normalizing.
pub fn embed_text(provider: &dyn EmbeddingProvider, text: &str) -> Result<Vec<f64>> {
    if text.trim().is_empty() {
        return Err(Error::Provider("cannot embed empty text".into()));
    }
    let mut v = provider.embed_raw(text)?;
    if v.len() != provider.dim() {
        return Err(Error::Shape(format!(
            "provider returned {} values, expected {}",
            v.len(),
            provider.dim()
        )));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !norm.is_finite() || norm == 0.0 {
        return Err(Error::Provider(format!("degenerate embedding for {text:?}")));
    }
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// Deterministic, model-free embedder: SHA-256 of (seed, text) seeds a
/// ChaCha stream that yields `dim` uniform values in [-1, 1).
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    dim: usize,
    seed: u64,
}

impl MockEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        MockEmbedder { dim, seed }
    }
}

impl Default for MockEmbedder {
    fn default() -> Self {
        MockEmbedder::new(DEFAULT_MOCK_DIM, 0)
    }
}

impl EmbeddingProvider for MockEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        let mut rng = ChaCha8Rng::from_seed(seed);
        Ok((0..self.dim).map(|_| rng.random_range(-1.0..1.0)).collect())
    }
}

/// Settings for an OpenAI-compatible `/embeddings` endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HttpEmbedderConfig {
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_embed_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_embed_key_env() -> String {
    "KGMEND_EMBED_API_KEY".into()
}

fn default_timeout_secs() -> u64 {
    60
}

#[derive(Debug)]
pub struct HttpEmbedder {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    token: Option<String>,
    dim: usize,
}

#[derive(Serialize)]
struct EmbeddingRequest<'a> {
    model: &'a str,
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl HttpEmbedder {
    /// Connects and learns the embedding dimension from a probe request.
    pub fn connect(cfg: &HttpEmbedderConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| Error::Provider(e.to_string()))?;
        let mut embedder = HttpEmbedder {
            client,
            url: format!("{}/embeddings", cfg.base_url.trim_end_matches('/')),
            model: cfg.model.clone(),
            token: std::env::var(&cfg.api_key_env).ok(),
            dim: 0,
        };
        embedder.dim = embedder.request("dimension probe")?.len();
        if embedder.dim == 0 {
            return Err(Error::Provider("endpoint returned an empty embedding".into()));
        }
        Ok(embedder)
    }

    fn request(&self, text: &str) -> Result<Vec<f64>> {
        let mut req = self.client.post(&self.url).json(&EmbeddingRequest {
            model: &self.model,
            input: text,
        });
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| Error::Provider(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(Error::Provider(format!("HTTP {}", resp.status())));
        }
        let body: EmbeddingResponse = resp.json().map_err(|e| Error::Provider(e.to_string()))?;
        body.data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| Error::Provider("response carried no embedding".into()))
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_raw(&self, text: &str) -> Result<Vec<f64>> {
        self.request(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_is_deterministic() {
        let p = MockEmbedder::default();
        assert_eq!(embed_text(&p, "alpha").unwrap(), embed_text(&p, "alpha").unwrap());
    }

    #[test]
    fn mock_is_unit_norm() {
        let p = MockEmbedder::default();
        for text in ["alpha", "beta", "a much longer label with spaces", "1979"] {
            let v = embed_text(&p, text).unwrap();
            assert_eq!(v.len(), DEFAULT_MOCK_DIM);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9, "{text}: {norm}");
        }
    }

    #[test]
    fn mock_separates_distinct_texts() {
        let p = MockEmbedder::default();
        assert_ne!(embed_text(&p, "alpha").unwrap(), embed_text(&p, "beta").unwrap());
    }

    #[test]
    fn seed_changes_embedding() {
        let a = MockEmbedder::new(8, 1);
        let b = MockEmbedder::new(8, 2);
        assert_ne!(embed_text(&a, "alpha").unwrap(), embed_text(&b, "alpha").unwrap());
    }

    #[test]
    fn empty_text_is_rejected() {
        assert!(embed_text(&MockEmbedder::default(), "  ").is_err());
    }
}
