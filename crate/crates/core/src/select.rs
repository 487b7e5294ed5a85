//! Budgeted, overlap-aware choice of which views to send for completion.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::sampler::SubgraphView;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Rank by score, apply threshold and overlap limit.
    Gnn,
    /// Uniform choice ignoring scores and overlap.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub threshold: f64,
    pub max_overlap: f64,
    pub budget: usize,
    pub strategy: SelectionStrategy,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            threshold: 0.50,
            max_overlap: 0.5,
            budget: 100,
            strategy: SelectionStrategy::Gnn,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("selection.threshold must lie in [0, 1], got {}", self.threshold)));
        }
        if !(0.0..=1.0).contains(&self.max_overlap) {
            return Err(Error::Config(format!(
                "selection.max_overlap must lie in [0, 1], got {}",
                self.max_overlap
            )));
        }
        if self.budget == 0 {
            return Err(Error::Config("selection.budget must be >= 1".into()));
        }
        Ok(())
    }
}

/// A candidate view and its missingness score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredView {
    pub view: SubgraphView,
    pub score: f64,
}

fn jaccard_sets(a: &BTreeSet<&NodeId>, b: &BTreeSet<&NodeId>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Node-set Jaccard similarity.
pub fn jaccard(a: &SubgraphView, b: &SubgraphView) -> f64 {
    jaccard_sets(&a.node_set(), &b.node_set())
}

/// Candidate indices by descending score, ties by root id.
fn ranked(candidates: &[ScoredView]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&candidates[i], &candidates[j]);
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.view.root.cmp(&b.view.root))
            .then(i.cmp(&j))
    });
    order
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Accepted,
    BelowThreshold,
    Overlap,
    OverBudget,
}

fn greedy(candidates: &[ScoredView], cfg: &SelectionConfig) -> Vec<(usize, Outcome)> {
    let sets: Vec<BTreeSet<&NodeId>> = candidates.iter().map(|c| c.view.node_set()).collect();
    let mut accepted: Vec<usize> = Vec::new();
    ranked(candidates)
        .into_iter()
        .map(|i| {
            let outcome = if candidates[i].score < cfg.threshold {
                Outcome::BelowThreshold
            } else if accepted.len() >= cfg.budget {
                Outcome::OverBudget
            } else if accepted.iter().any(|&j| jaccard_sets(&sets[i], &sets[j]) > cfg.max_overlap) {
                Outcome::Overlap
            } else {
                accepted.push(i);
                Outcome::Accepted
            };
            (i, outcome)
        })
        .collect()
}

/// Indices of the chosen candidates, in acceptance order.
///
/// The random strategy consumes `rng`; the score-ranked one does not.
pub fn select<R: Rng + ?Sized>(candidates: &[ScoredView], cfg: &SelectionConfig, rng: &mut R) -> Vec<usize> {
    match cfg.strategy {
        SelectionStrategy::Gnn => greedy(candidates, cfg)
            .into_iter()
            .filter(|(_, o)| *o == Outcome::Accepted)
            .map(|(i, _)| i)
            .collect(),
        SelectionStrategy::Random => {
            let k = cfg.budget.min(candidates.len());
            sample_indices(rng, candidates.len(), k).into_vec()
        }
    }
}

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub strategy: Option<SelectionStrategy>,
    pub scored: usize,
    pub above_threshold: usize,
    pub overlap_skipped: usize,
    pub budget_truncated: usize,
    pub selected: usize,
    /// Counts of scores in `[k/10, (k+1)/10)`, the last bin closed.
    pub histogram: [usize; HISTOGRAM_BINS],
}

pub fn score_histogram(candidates: &[ScoredView]) -> [usize; HISTOGRAM_BINS] {
    let mut h = [0; HISTOGRAM_BINS];
    for c in candidates {
        let bin = ((c.score * HISTOGRAM_BINS as f64).floor() as isize).clamp(0, HISTOGRAM_BINS as isize - 1);
        h[bin as usize] += 1;
    }
    h
}

/// Summarizes how a selection came about. `selected` is the output of
/// [`select`] on the same candidates and config.
pub fn selection_report(candidates: &[ScoredView], selected: &[usize], cfg: &SelectionConfig) -> SelectionReport {
    let above = candidates.iter().filter(|c| c.score >= cfg.threshold).count();
    let (overlap_skipped, budget_truncated) = match cfg.strategy {
        SelectionStrategy::Gnn => {
            let trace = greedy(candidates, cfg);
            let count = |o: Outcome| trace.iter().filter(|(_, x)| *x == o).count();
            (count(Outcome::Overlap), count(Outcome::OverBudget))
        }
        SelectionStrategy::Random => (0, candidates.len() - selected.len()),
    };
    SelectionReport {
        strategy: (!candidates.is_empty()).then_some(cfg.strategy),
        scored: candidates.len(),
        above_threshold: above,
        overlap_skipped,
        budget_truncated,
        selected: selected.len(),
        histogram: score_histogram(candidates),
    }
}
