//! Evidence-grounded completion: prompt assembly, backends, response
//! parsing, citation checks and merge into the index.

pub mod backend;
pub mod context;
pub mod merge;
pub mod parse;

use serde::{Deserialize, Serialize};

pub use backend::{CompletionBackend, HttpBackend, HttpBackendConfig, MockBackend};
pub use context::{
    assemble_context, extract_evidence_ids, render_prompt, CompletionRequest, Evidence, KnownTriple,
    DEFAULT_MAX_EVIDENCE,
};
pub use merge::{merge, MergeReport, RejectCounts};
pub use parse::{parse_response, validate, ParseOutcome, ProposedTriple, RejectReason, Validation};

use crate::error::{Error, Result};
use crate::graph::{EmbeddingProvider, GraphIndex};
use crate::sampler::SubgraphView;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompletionConfig {
    pub max_evidence: usize,
    /// Backend calls in flight at once.
    pub parallelism: usize,
}

impl Default for CompletionConfig {
    fn default() -> Self {
        CompletionConfig {
            max_evidence: DEFAULT_MAX_EVIDENCE,
            parallelism: 4,
        }
    }
}

impl CompletionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_evidence == 0 || self.parallelism == 0 {
            return Err(Error::Config(
                "completion.max_evidence and completion.parallelism must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// What came back for one view, before merging.
#[derive(Debug, Clone)]
pub struct ViewCompletion {
    pub request: CompletionRequest,
    pub root: String,
    /// `None` when the backend gave up.
    pub validation: Option<Validation>,
    pub malformed: usize,
}

pub fn complete_view(
    g: &GraphIndex,
    view: &SubgraphView,
    backend: &dyn CompletionBackend,
    cfg: &CompletionConfig,
) -> Result<ViewCompletion> {
    let request = assemble_context(g, view, cfg.max_evidence)?;
    let prompt = render_prompt(&request);
    let (validation, malformed) = match backend.complete(&prompt) {
        Ok(text) => {
            let parsed = parse_response(&text);
            (Some(validate(parsed.triples, &request)), parsed.malformed)
        }
        Err(e) => {
            log::warn!("view {}: {e}", view.root);
            (None, 0)
        }
    };
    Ok(ViewCompletion {
        request,
        root: view.root.to_string(),
        validation,
        malformed,
    })
}

/// Runs completion for every view against the current graph, then merges
/// the validated triples one view at a time in root-id order.
pub fn complete_and_merge(
    g: &mut GraphIndex,
    views: &[SubgraphView],
    backend: &dyn CompletionBackend,
    provider: &dyn EmbeddingProvider,
    cfg: &CompletionConfig,
) -> Result<MergeReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let snapshot: &GraphIndex = g;
    let mut results: Vec<ViewCompletion> = pool.install(|| {
        use rayon::prelude::*;
        views
            .par_iter()
            .map(|v| complete_view(snapshot, v, backend, cfg))
            .collect::<Result<_>>()
    })?;
    results.sort_by(|a, b| a.root.cmp(&b.root));

    let mut report = MergeReport::default();
    for r in results {
        report.views += 1;
        let Some(validation) = r.validation else {
            report.backend_errors += 1;
            continue;
        };
        let mut part = merge(g, &validation.validated, provider);
        for (_, reason) in &validation.rejected {
            part.rejected.add(*reason, 1);
        }
        part.rejected.add(RejectReason::Malformed, r.malformed);
        part.received += validation.rejected.len() + r.malformed;
        report.absorb(&part);
    }
    Ok(report)
}
