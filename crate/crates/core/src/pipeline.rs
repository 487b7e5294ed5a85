//! Candidate sampling, scoring, selection and completion, end to end.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::complete::{complete_and_merge, CompletionBackend, CompletionConfig, MergeReport};
use crate::error::{Error, Result};
use crate::gnn::{score_prepared, MissingnessModel, PreparedView};
use crate::graph::{EmbeddingProvider, GraphIndex, GraphStats, NodeId};
use crate::sampler::{eligible_roots, sample_subgraph, SamplerConfig, SubgraphView};
use crate::select::{select, selection_report, ScoredView, SelectionConfig, SelectionReport};

/// A seed for one root, stable across runs and independent of root order.
pub fn root_seed(seed: u64, root: &NodeId) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(root.as_str().as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// One standard view per eligible root, in root order. Roots whose view
/// fails the sampler's filters are skipped.
pub fn sample_candidates(g: &GraphIndex, cfg: &SamplerConfig, seed: u64) -> Vec<SubgraphView> {
    eligible_roots(g)
        .par_iter()
        .filter_map(|root| {
            let mut rng = ChaCha8Rng::seed_from_u64(root_seed(seed, root));
            sample_subgraph(g, cfg, root, &mut rng)
        })
        .collect()
}

pub fn score_views(model: &MissingnessModel, g: &GraphIndex, views: Vec<SubgraphView>) -> Result<Vec<ScoredView>> {
    views
        .into_par_iter()
        .map(|view| {
            let prepared = PreparedView::new(g, &view, model.config.input_dim)?;
            let score = score_prepared(model, &prepared)?.missingness;
            Ok(ScoredView { view, score })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub sample_ms: u128,
    pub score_ms: u128,
    pub select_ms: u128,
    pub complete_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub selection: SelectionReport,
    pub merge: MergeReport,
    pub before: GraphStats,
    pub after: GraphStats,
    pub timings: StageTimings,
}

impl AugmentReport {
    /// Whether the merge counts agree with the change in graph statistics.
    pub fn accounting_holds(&self) -> bool {
        let d = GraphStats::delta(&self.before, &self.after);
        d.nodes == self.merge.nodes_added as i64
            && d.edges == self.merge.edges_added as i64
            && d.triples == self.merge.triples_added as i64
    }
}

pub struct AugmentSettings<'a> {
    pub sampler: &'a SamplerConfig,
    pub selection: &'a SelectionConfig,
    pub completion: &'a CompletionConfig,
    pub seed: u64,
}

/// Samples, scores and selects candidates, then completes and merges the
/// selected views into `g`.
pub fn augment(
    g: &mut GraphIndex,
    model: &MissingnessModel,
    settings: &AugmentSettings<'_>,
    backend: &dyn CompletionBackend,
    provider: &dyn EmbeddingProvider,
) -> Result<AugmentReport> {
    settings.selection.validate()?;
    if let Some(d) = g.dim() {
        if d != model.config.input_dim {
            return Err(Error::ConfigMismatch {
                expected: format!("input_dim {d}"),
                found: format!("input_dim {}", model.config.input_dim),
            });
        }
    }
    let before = g.stats();
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let candidates = sample_candidates(g, settings.sampler, settings.seed);
    timings.sample_ms = t.elapsed().as_millis();

    let t = Instant::now();
    let scored = score_views(model, g, candidates)?;
    timings.score_ms = t.elapsed().as_millis();

    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let chosen = select(&scored, settings.selection, &mut rng);
    let selection = selection_report(&scored, &chosen, settings.selection);
    let views: Vec<SubgraphView> = chosen.iter().map(|&i| scored[i].view.clone()).collect();
    timings.select_ms = t.elapsed().as_millis();
    log::info!(
        "selected {} of {} candidates ({} above threshold)",
        selection.selected,
        selection.scored,
        selection.above_threshold
    );

    let t = Instant::now();
    let merge = complete_and_merge(g, &views, backend, provider, settings.completion)?;
    timings.complete_ms = t.elapsed().as_millis();

    Ok(AugmentReport {
        selection,
        merge,
        before,
        after: g.stats(),
        timings,
    })
}
