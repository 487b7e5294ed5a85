//! The pipeline configuration file.
//!
//! Every section is optional and falls back to its defaults; unknown keys are
//! rejected.
//!
//! ```toml
//! seed = 7
//!
//! [corruption]
//! edge_mask_ratio = 0.2
//!
//! [selection]
//! threshold = 0.5
//! budget = 100
//! strategy = "gnn"
//!
//! [backend]
//! kind = "mock"
//! mock_table = "fixture/mock.txt"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::complete::{CompletionBackend, CompletionConfig, HttpBackend, HttpBackendConfig, MockBackend};
use crate::corrupt::CorruptionConfig;
use crate::error::{Error, Result};
use crate::gnn::{ModelConfig, TrainConfig};
use crate::graph::{EmbeddingProvider, HttpEmbedder, HttpEmbedderConfig, MockEmbedder};
use crate::sampler::SamplerConfig;
use crate::select::SelectionConfig;
use crate::synth::SynthConfig;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackendConfig {
    pub kind: ProviderKind,
    /// Triples the mock answers from, in the response layout.
    pub mock_table: Option<PathBuf>,
    pub http: HttpBackendConfig,
}

impl BackendConfig {
    pub fn build(&self) -> Result<Box<dyn CompletionBackend>> {
        Ok(match self.kind {
            ProviderKind::Mock => {
                let path = self
                    .mock_table
                    .as_ref()
                    .ok_or_else(|| Error::Config("backend.mock_table is required for the mock backend".into()))?;
                Box::new(MockBackend::from_file(path)?)
            }
            ProviderKind::Http => Box::new(HttpBackend::new(self.http.clone())?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingConfig {
    pub kind: ProviderKind,
    /// Dimension of the mock embedder.
    pub dim: usize,
    pub seed: u64,
    pub http: Option<HttpEmbedderConfig>,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig {
            kind: ProviderKind::Mock,
            dim: 64,
            seed: 0,
            http: None,
        }
    }
}

impl EmbeddingConfig {
    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>> {
        Ok(match self.kind {
            ProviderKind::Mock => {
                if self.dim == 0 {
                    return Err(Error::Config("embedding.dim must be >= 1".into()));
                }
                Box::new(MockEmbedder::new(self.dim, self.seed))
            }
            ProviderKind::Http => {
                let cfg = self
                    .http
                    .as_ref()
                    .ok_or_else(|| Error::Config("embedding.http is required for the http provider".into()))?;
                Box::new(HttpEmbedder::connect(cfg)?)
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub graph: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Seed for candidate sampling and random selection.
    pub seed: u64,
    pub sampler: SamplerConfig,
    pub corruption: CorruptionConfig,
    pub model: ModelConfig,
    pub training: TrainConfig,
    pub selection: SelectionConfig,
    pub completion: CompletionConfig,
    pub backend: BackendConfig,
    pub embedding: EmbeddingConfig,
    pub synth: SynthConfig,
    pub paths: PathsConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        self.corruption.validate()?;
        self.model.validate()?;
        self.training.validate()?;
        self.selection.validate()?;
        self.completion.validate()?;
        Ok(())
    }

    /// Sets every seed in the file to `seed`.
    pub fn set_all_seeds(&mut self, seed: u64) {
        self.seed = seed;
        self.model.seed = seed;
        self.training.seed = seed;
        self.synth.seed = seed;
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(&json))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::SelectionStrategy;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(PipelineConfig::from_toml_str("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = PipelineConfig::from_toml_str(
            "seed = 3\n[selection]\nthreshold = 0.55\nstrategy = \"random\"\n[corruption]\nnode_delete_ratio = 0.1\n",
        )
        .unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.selection.threshold, 0.55);
        assert_eq!(cfg.selection.strategy, SelectionStrategy::Random);
        assert_eq!(cfg.selection.budget, 100);
        assert_eq!(cfg.corruption.node_delete_ratio, 0.1);
        assert_eq!(cfg.corruption.edge_mask_ratio, 0.2);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = PipelineConfig::from_toml_str("[selection]\nthreshhold = 0.5\n").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config(_)));
        assert!(msg.contains("threshhold"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
        assert!(PipelineConfig::from_toml_str("[nonsense]\n").is_err());
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        assert!(PipelineConfig::from_toml_str("[selection]\nthreshold = 1.5\n").is_err());
        assert!(PipelineConfig::from_toml_str("[corruption]\nedge_mask_ratio = 0.0\n").is_err());
        assert!(PipelineConfig::from_toml_str("[model]\nmessage_layers = 3\n").is_err());
    }

    #[test]
    fn toml_round_trip_and_digest() {
        let mut cfg = PipelineConfig::default();
        cfg.backend.mock_table = Some("t.txt".into());
        let back = PipelineConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.digest(), cfg.digest());
        assert_eq!(cfg.digest().len(), 64);
        let mut other = cfg.clone();
        other.seed = 1;
        assert_ne!(other.digest(), cfg.digest());
    }
}
