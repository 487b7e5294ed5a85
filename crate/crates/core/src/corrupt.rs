//! Corruption operators and per-epoch training-group assembly.

use std::collections::BTreeSet;

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeType, GraphIndex, NodeId};
use crate::sampler::{eligible_roots, sample_intact_view, sample_subgraph, SamplerConfig, SubgraphView, ViewLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorruptionConfig {
    pub edge_mask_ratio: f64,
    pub node_delete_ratio: f64,
    pub min_remaining_fact_edges: usize,
    pub roots_per_epoch: usize,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        CorruptionConfig {
            edge_mask_ratio: 0.20,
            node_delete_ratio: 0.08,
            min_remaining_fact_edges: 1,
            roots_per_epoch: 100,
        }
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("edge_mask_ratio", self.edge_mask_ratio),
            ("node_delete_ratio", self.node_delete_ratio),
        ] {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::Config(format!("corruption.{name} must lie in (0, 1), got {r}")));
            }
        }
        if self.min_remaining_fact_edges == 0 {
            return Err(Error::Config("corruption.min_remaining_fact_edges must be >= 1".into()));
        }
        if self.roots_per_epoch == 0 {
            return Err(Error::Config("corruption.roots_per_epoch must be >= 1".into()));
        }
        Ok(())
    }
}

/// `max(1, round_half_up(ratio * n))`.
pub fn removal_count(ratio: f64, n: usize) -> usize {
    ((ratio * n as f64 + 0.5).floor() as usize).max(1)
}

/// Removes `max(1, round(ρ_e · F))` fact edges, capped so that at least
/// `min_remaining_fact_edges` survive.
pub fn mask_fact_edges<R: Rng + ?Sized>(
    view: &SubgraphView,
    cfg: &CorruptionConfig,
    rng: &mut R,
) -> Result<SubgraphView> {
    let facts: Vec<usize> = view
        .edges
        .iter()
        .enumerate()
        .filter(|(_, e)| e.edge_type == EdgeType::Fact)
        .map(|(i, _)| i)
        .collect();
    let floor = cfg.min_remaining_fact_edges;
    if facts.len() <= floor {
        return Err(Error::NotCorruptible(view.root.to_string()));
    }
    let m = removal_count(cfg.edge_mask_ratio, facts.len()).min(facts.len() - floor);
    let chosen: BTreeSet<usize> = sample_indices(rng, facts.len(), m)
        .into_iter()
        .map(|k| facts[k])
        .collect();

    let mut out = view.clone();
    out.edges.clear();
    for (i, e) in view.edges.iter().enumerate() {
        if chosen.contains(&i) {
            out.corruption.masked_edges.push(e.clone());
        } else {
            out.edges.push(e.clone());
        }
    }
    out.label = ViewLabel::Corrupted;
    Ok(out)
}

/// Deletes up to `max(1, round(ρ_v · |eligible|))` non-root entities that
/// sit on a fact edge, skipping any deletion that would leave fewer than
/// `min_remaining_fact_edges` fact edges. Incident edges go with the node.
pub fn delete_entity_nodes<R: Rng + ?Sized>(
    view: &SubgraphView,
    cfg: &CorruptionConfig,
    rng: &mut R,
) -> Result<SubgraphView> {
    let on_fact_edge = |v: &SubgraphView, n: &NodeId| v.fact_edges().any(|e| e.touches(n));
    let mut eligible: Vec<NodeId> = view
        .nodes
        .iter()
        .filter(|n| **n != view.root && on_fact_edge(view, n))
        .cloned()
        .collect();
    if eligible.is_empty() {
        return Err(Error::NotCorruptible(view.root.to_string()));
    }
    let target = removal_count(cfg.node_delete_ratio, eligible.len());
    eligible.shuffle(rng);

    let mut out = view.clone();
    let mut removed = 0;
    for candidate in eligible {
        if removed == target {
            break;
        }
        if !on_fact_edge(&out, &candidate) {
            continue;
        }
        let lost_facts = out.fact_edges().filter(|e| e.touches(&candidate)).count();
        if out.fact_edge_count() - lost_facts < cfg.min_remaining_fact_edges {
            continue;
        }
        let (gone, kept): (Vec<_>, Vec<_>) = out.edges.drain(..).partition(|e| e.touches(&candidate));
        out.edges = kept;
        out.corruption.detached_edges.extend(gone);
        out.nodes.retain(|n| *n != candidate);
        out.corruption.deleted_nodes.push(candidate);
        removed += 1;
    }
    if removed == 0 {
        return Err(Error::NotCorruptible(view.root.to_string()));
    }
    out.corruption.deleted_nodes.sort();
    out.corruption.detached_edges.sort();
    out.label = ViewLabel::Corrupted;
    Ok(out)
}

/// Applies one operator chosen uniformly, falling back to the other when the
/// first cannot corrupt the view.
pub fn corrupt<R: Rng + ?Sized>(view: &SubgraphView, cfg: &CorruptionConfig, rng: &mut R) -> Result<SubgraphView> {
    if rng.random_bool(0.5) {
        mask_fact_edges(view, cfg, rng).or_else(|_| delete_entity_nodes(view, cfg, rng))
    } else {
        delete_entity_nodes(view, cfg, rng).or_else(|_| mask_fact_edges(view, cfg, rng))
    }
}

/// Builds one epoch of training views: for each of `roots_per_epoch` roots,
/// an intact view (y = 0) and a corrupted standard view (y = 1).
///
/// Roots are drawn without replacement when enough exist. A root whose
/// views cannot be built or corrupted is dropped, so the classes stay balanced.
pub fn build_training_epoch<R: Rng + ?Sized>(
    g: &GraphIndex,
    sampler: &SamplerConfig,
    cfg: &CorruptionConfig,
    rng: &mut R,
) -> Result<Vec<SubgraphView>> {
    let roots = eligible_roots(g);
    if roots.is_empty() {
        return Err(Error::EmptyEpoch("graph has no eligible root entities".into()));
    }
    let picked: Vec<&NodeId> = if roots.len() >= cfg.roots_per_epoch {
        sample_indices(rng, roots.len(), cfg.roots_per_epoch)
            .into_iter()
            .map(|i| &roots[i])
            .collect()
    } else {
        (0..cfg.roots_per_epoch)
            .map(|_| &roots[rng.random_range(0..roots.len())])
            .collect()
    };
    let seeds: Vec<u64> = picked.iter().map(|_| rng.random()).collect();

    let pairs: Vec<Option<(SubgraphView, SubgraphView)>> = picked
        .par_iter()
        .zip(seeds.par_iter())
        .map(|(root, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let intact = sample_intact_view(g, sampler, root, &mut rng)?;
            let base = sample_subgraph(g, sampler, root, &mut rng)?;
            let corrupted = corrupt(&base, cfg, &mut rng).ok()?;
            Some((intact, corrupted))
        })
        .collect();

    let views: Vec<SubgraphView> = pairs
        .into_iter()
        .flatten()
        .flat_map(|(a, b)| [a, b])
        .collect();
    if views.is_empty() {
        return Err(Error::EmptyEpoch("no root produced a usable intact/corrupted pair".into()));
    }
    Ok(views)
}
