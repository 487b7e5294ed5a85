//! Recovery metrics against planted truth, and scorer ROC-AUC.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{score_prepared, MissingnessModel, PreparedView};
use crate::graph::{EdgeOrigin, EdgeType, GraphIndex, TripleKey};
use crate::sampler::SubgraphView;
use crate::synth::PlantedTruth;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub planted: usize,
    pub hidden: usize,
    /// Planted triples present in the graph.
    pub present: usize,
    /// Hidden planted triples present in the graph.
    pub recovered: usize,
    pub recall: f64,
    pub hidden_recall: f64,
    /// Fact edges that came from completion.
    pub completion_edges: usize,
    /// Completion edges whose key is a planted triple.
    pub completion_matches: usize,
    /// `completion_matches / completion_edges`; 1.0 when nothing was added.
    pub precision: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub fn evaluate_recovery(g: &GraphIndex, truth: &PlantedTruth) -> RecoveryMetrics {
    let keys: HashSet<TripleKey> = g
        .edges()
        .filter(|e| e.edge_type == EdgeType::Fact)
        .filter_map(|e| g.triple_key(e))
        .collect();
    let planted: HashSet<TripleKey> = truth.relations.iter().map(|r| r.key()).collect();
    let present = truth.relations.iter().filter(|r| keys.contains(&r.key())).count();
    let hidden = truth.hidden().count();
    let recovered = truth.hidden().filter(|r| keys.contains(&r.key())).count();
    let completion: Vec<TripleKey> = g
        .edges()
        .filter(|e| e.edge_type == EdgeType::Fact && e.origin == EdgeOrigin::Completion)
        .filter_map(|e| g.triple_key(e))
        .collect();
    let matches = completion.iter().filter(|k| planted.contains(k)).count();
    RecoveryMetrics {
        planted: truth.relations.len(),
        hidden,
        present,
        recovered,
        recall: if truth.relations.is_empty() {
            0.0
        } else {
            present as f64 / truth.relations.len() as f64
        },
        hidden_recall: if hidden == 0 { 0.0 } else { recovered as f64 / hidden as f64 },
        completion_edges: completion.len(),
        completion_matches: matches,
        precision: ratio(matches, completion.len()),
    }
}

/// Area under the ROC curve via the rank-sum statistic; tied scores share
/// their average rank, so a tie between classes counts one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc(format!("{pos} positive and {neg} negative examples")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their mean.
        let mean_rank = (i + j + 2) as f64 / 2.0;
        rank_sum += mean_rank * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// ROC-AUC of the model's score against view labels (corrupted = positive).
/// Views without a label are ignored.
pub fn scorer_auc(model: &MissingnessModel, g: &GraphIndex, views: &[SubgraphView]) -> Result<f64> {
    use rayon::prelude::*;
    let scored: Vec<(f64, bool)> = views
        .par_iter()
        .filter_map(|v| v.label.target().map(|y| (v, y > 0.5)))
        .map(|(v, y)| {
            let p = PreparedView::new(g, v, model.config.input_dim)?;
            Ok((score_prepared(model, &p)?.missingness, y))
        })
        .collect::<Result<_>>()?;
    let (scores, labels): (Vec<f64>, Vec<bool>) = scored.into_iter().unzip();
    roc_auc(&scores, &labels)
}
