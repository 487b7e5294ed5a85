//! Root selection and weighted random-walk subgraph sampling.
//!
//! Walks move only along entity–entity edges (fact and synonym). A step from
//! `u` picks neighbour `v` with probability proportional to
//! `min(w_e, clip) * multiplier(type(e))`.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, EdgeType, GraphIndex, NodeId, NodeType};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// Edge weights above this are clipped before use.
    pub clip: f64,
    pub fact_multiplier: f64,
    pub synonym_multiplier: f64,
    pub walks_per_root: usize,
    /// Maximum walk length in entity hops.
    pub walk_length: usize,
    pub min_nodes: usize,
    pub min_fact_edges: usize,
    /// Intact views use `ceil(factor * walks)` walks of `ceil(factor * length)` hops.
    pub intact_expansion_factor: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            clip: 5.0,
            fact_multiplier: 1.0,
            synonym_multiplier: 0.5,
            walks_per_root: 8,
            walk_length: 4,
            min_nodes: 5,
            min_fact_edges: 1,
            intact_expansion_factor: 2.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("clip", self.clip),
            ("fact_multiplier", self.fact_multiplier),
            ("synonym_multiplier", self.synonym_multiplier),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("sampler.{name} must be positive, got {v}")));
            }
        }
        if self.fact_multiplier <= self.synonym_multiplier {
            return Err(Error::Config(
                "sampler.fact_multiplier must exceed sampler.synonym_multiplier".into(),
            ));
        }
        let counts = [
            ("walks_per_root", self.walks_per_root),
            ("walk_length", self.walk_length),
            ("min_nodes", self.min_nodes),
            ("min_fact_edges", self.min_fact_edges),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("sampler.{name} must be at least 1")));
            }
        }
        if !(self.intact_expansion_factor.is_finite() && self.intact_expansion_factor >= 1.0) {
            return Err(Error::Config("sampler.intact_expansion_factor must be >= 1".into()));
        }
        Ok(())
    }

    fn multiplier(&self, ty: EdgeType) -> f64 {
        match ty {
            EdgeType::Fact => self.fact_multiplier,
            EdgeType::Synonym => self.synonym_multiplier,
            EdgeType::EntityChunk => 0.0,
        }
    }

    fn expanded(&self) -> (usize, usize) {
        let f = self.intact_expansion_factor;
        (
            (self.walks_per_root as f64 * f).ceil() as usize,
            (self.walk_length as f64 * f).ceil() as usize,
        )
    }
}

/// An edge inside a view, carrying its endpoints so the view is self-contained.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ViewEdge {
    pub id: EdgeId,
    pub u: NodeId,
    pub v: NodeId,
    pub edge_type: EdgeType,
}

impl ViewEdge {
    pub fn touches(&self, node: &NodeId) -> bool {
        &self.u == node || &self.v == node
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewLabel {
    /// Negative training example (y = 0).
    Intact,
    /// Positive training example (y = 1).
    Corrupted,
    Unlabeled,
}

impl ViewLabel {
    pub fn target(self) -> Option<f64> {
        match self {
            ViewLabel::Intact => Some(0.0),
            ViewLabel::Corrupted => Some(1.0),
            ViewLabel::Unlabeled => None,
        }
    }
}

/// What a corruption operator removed from a view.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionRecord {
    pub masked_edges: Vec<ViewEdge>,
    pub deleted_nodes: Vec<NodeId>,
    /// Edges that disappeared because an endpoint was deleted.
    pub detached_edges: Vec<ViewEdge>,
}

impl CorruptionRecord {
    pub fn is_empty(&self) -> bool {
        self.masked_edges.is_empty() && self.deleted_nodes.is_empty()
    }
}

/// A root-anchored sampled region of the entity graph.
///
/// `nodes` and `edges` are kept sorted by the sampler and corruptor; consumers
/// must not rely on that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgraphView {
    pub root: NodeId,
    pub nodes: Vec<NodeId>,
    /// Fact and synonym edges among `nodes`.
    pub edges: Vec<ViewEdge>,
    pub label: ViewLabel,
    pub corruption: CorruptionRecord,
}

impl SubgraphView {
    pub fn fact_edges(&self) -> impl Iterator<Item = &ViewEdge> {
        self.edges.iter().filter(|e| e.edge_type == EdgeType::Fact)
    }

    pub fn fact_edge_count(&self) -> usize {
        self.fact_edges().count()
    }

    pub fn node_set(&self) -> BTreeSet<&NodeId> {
        self.nodes.iter().collect()
    }

    /// Re-inserts everything recorded as removed, giving the uncorrupted view.
    pub fn restore(&self) -> SubgraphView {
        let mut nodes: BTreeSet<NodeId> = self.nodes.iter().cloned().collect();
        nodes.extend(self.corruption.deleted_nodes.iter().cloned());
        let mut edges: BTreeSet<ViewEdge> = self.edges.iter().cloned().collect();
        edges.extend(self.corruption.masked_edges.iter().cloned());
        edges.extend(self.corruption.detached_edges.iter().cloned());
        SubgraphView {
            root: self.root.clone(),
            nodes: nodes.into_iter().collect(),
            edges: edges.into_iter().collect(),
            label: ViewLabel::Unlabeled,
            corruption: CorruptionRecord::default(),
        }
    }
}

/// Whether a label carries any letter once whitespace, punctuation and signs
/// are stripped. Purely numeric labels such as "1979" or "3.14" do not.
pub fn is_informative_label(label: &str) -> bool {
    label
        .chars()
        .filter(|c| !(c.is_whitespace() || c.is_ascii_punctuation() || matches!(c, '±' | '−')))
        .any(char::is_alphabetic)
}

fn has_entity_neighbor(g: &GraphIndex, id: &NodeId) -> bool {
    g.adjacency(id)
        .is_some_and(|a| !a.fact.is_empty() || !a.synonym.is_empty())
}

/// Entity nodes with an informative label and at least one entity neighbour,
/// in id order.
pub fn eligible_roots(g: &GraphIndex) -> Vec<NodeId> {
    g.nodes()
        .filter(|n| n.node_type == NodeType::Entity)
        .filter(|n| is_informative_label(&n.label))
        .filter(|n| has_entity_neighbor(g, &n.id))
        .map(|n| n.id.clone())
        .collect()
}

/// Step distribution out of `u`, as `(neighbour, probability)` sorted by
/// neighbour id. Parallel edges to the same neighbour pool their mass.
pub fn transition_distribution(g: &GraphIndex, cfg: &SamplerConfig, u: &NodeId) -> Result<Vec<(NodeId, f64)>> {
    let mut mass: BTreeMap<&NodeId, f64> = BTreeMap::new();
    for ty in [EdgeType::Fact, EdgeType::Synonym] {
        for (edge, other) in g.neighbors(u, ty) {
            *mass.entry(other).or_insert(0.0) += edge.weight.min(cfg.clip) * cfg.multiplier(ty);
        }
    }
    let total: f64 = mass.values().sum();
    if mass.is_empty() || total <= 0.0 {
        return Err(Error::EmptyDistribution(u.to_string()));
    }
    Ok(mass
        .into_iter()
        .map(|(v, w)| (v.clone(), w / total))
        .collect())
}

fn step<R: Rng + ?Sized>(g: &GraphIndex, cfg: &SamplerConfig, u: &NodeId, rng: &mut R) -> Option<NodeId> {
    let dist = transition_distribution(g, cfg, u).ok()?;
    let index = WeightedIndex::new(dist.iter().map(|(_, p)| *p)).ok()?;
    Some(dist[index.sample(rng)].0.clone())
}

fn walk_with<R: Rng + ?Sized>(
    g: &GraphIndex,
    cfg: &SamplerConfig,
    root: &NodeId,
    hops: usize,
    rng: &mut R,
) -> Vec<NodeId> {
    let mut walk = Vec::with_capacity(hops + 1);
    walk.push(root.clone());
    for _ in 0..hops {
        let here = walk.last().expect("walk starts at root");
        match step(g, cfg, here, rng) {
            Some(next) => walk.push(next),
            None => break,
        }
    }
    walk
}

/// One weighted walk of at most `cfg.walk_length` hops, starting at `root`.
pub fn random_walk<R: Rng + ?Sized>(g: &GraphIndex, cfg: &SamplerConfig, root: &NodeId, rng: &mut R) -> Vec<NodeId> {
    walk_with(g, cfg, root, cfg.walk_length, rng)
}

/// Induced fact/synonym edges among `nodes`, sorted.
pub fn induced_edges(g: &GraphIndex, nodes: &BTreeSet<NodeId>) -> Vec<ViewEdge> {
    let mut edges = BTreeSet::new();
    for n in nodes {
        for ty in [EdgeType::Fact, EdgeType::Synonym] {
            for (e, other) in g.neighbors(n, ty) {
                if nodes.contains(other) {
                    edges.insert(ViewEdge {
                        id: e.id.clone(),
                        u: e.u.clone(),
                        v: e.v.clone(),
                        edge_type: e.edge_type,
                    });
                }
            }
        }
    }
    edges.into_iter().collect()
}

fn sample_with<R: Rng + ?Sized>(
    g: &GraphIndex,
    cfg: &SamplerConfig,
    root: &NodeId,
    walks: usize,
    hops: usize,
    label: ViewLabel,
    rng: &mut R,
) -> Option<SubgraphView> {
    let mut nodes = BTreeSet::new();
    nodes.insert(root.clone());
    for _ in 0..walks {
        nodes.extend(walk_with(g, cfg, root, hops, rng));
    }
    let edges = induced_edges(g, &nodes);
    let facts = edges.iter().filter(|e| e.edge_type == EdgeType::Fact).count();
    if nodes.len() < cfg.min_nodes || facts < cfg.min_fact_edges {
        return None;
    }
    Some(SubgraphView {
        root: root.clone(),
        nodes: nodes.into_iter().collect(),
        edges,
        label,
        corruption: CorruptionRecord::default(),
    })
}

/// Union of `walks_per_root` walks from `root`. `None` when the result is
/// smaller than `min_nodes` or has fewer than `min_fact_edges` fact edges.
pub fn sample_subgraph<R: Rng + ?Sized>(
    g: &GraphIndex,
    cfg: &SamplerConfig,
    root: &NodeId,
    rng: &mut R,
) -> Option<SubgraphView> {
    sample_with(g, cfg, root, cfg.walks_per_root, cfg.walk_length, ViewLabel::Unlabeled, rng)
}

/// A wider exploration around `root`, labeled as an intact (negative) view.
/// Subject to the same retention filter as [`sample_subgraph`].
pub fn sample_intact_view<R: Rng + ?Sized>(
    g: &GraphIndex,
    cfg: &SamplerConfig,
    root: &NodeId,
    rng: &mut R,
) -> Option<SubgraphView> {
    let (walks, hops) = cfg.expanded();
    sample_with(g, cfg, root, walks, hops, ViewLabel::Intact, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ChunkId, Edge, Node};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn graph(nodes: &[(&str, &str)], edges: Vec<Edge>) -> GraphIndex {
        let mut g = GraphIndex::new();
        g.add_chunk("c", "text").unwrap();
        g.add_node(Node::chunk("c", "c")).unwrap();
        for (id, label) in nodes {
            g.add_node(Node::entity(*id, *label)).unwrap();
        }
        for e in edges {
            g.add_edge(e).unwrap();
        }
        g
    }

    fn fact(id: &str, u: &str, v: &str, w: f64) -> Edge {
        Edge::fact(id, u, format!("rel-{id}"), v, [ChunkId::from("c")]).with_weight(w)
    }

    fn prob(dist: &[(NodeId, f64)], v: &str) -> f64 {
        dist.iter().find(|(n, _)| n.as_str() == v).map(|(_, p)| *p).unwrap()
    }

    #[test]
    fn informative_labels() {
        assert!(is_informative_label("Paris"));
        assert!(is_informative_label("R2-D2"));
        assert!(!is_informative_label("1979"));
        assert!(!is_informative_label("1,979"));
        assert!(!is_informative_label("-3.14"));
        assert!(!is_informative_label("  "));
    }

    #[test]
    fn eligibility() {
        let mut g = graph(
            &[("paris", "Paris"), ("fr", "France"), ("y", "1979"), ("lonely", "Lonely")],
            vec![fact("f1", "paris", "fr", 1.0), fact("f2", "y", "fr", 1.0)],
        );
        g.add_edge(Edge::entity_chunk("ec", "lonely", "c")).unwrap();
        let roots = eligible_roots(&g);
        let ids: Vec<&str> = roots.iter().map(NodeId::as_str).collect();
        assert_eq!(ids, ["fr", "paris"]);
    }

    #[test]
    fn single_neighbor_has_probability_one() {
        let g = graph(&[("a", "A"), ("b", "B")], vec![fact("f", "a", "b", 1.0)]);
        let d = transition_distribution(&g, &SamplerConfig::default(), &"a".into()).unwrap();
        assert_eq!(d, vec![(NodeId::from("b"), 1.0)]);
    }

    #[test]
    fn weights_are_normalized() {
        let g = graph(
            &[("a", "A"), ("b", "B"), ("c2", "C")],
            vec![fact("f1", "a", "b", 2.0), fact("f2", "a", "c2", 3.0)],
        );
        let d = transition_distribution(&g, &SamplerConfig::default(), &"a".into()).unwrap();
        assert!((prob(&d, "b") - 0.4).abs() < 1e-12);
        assert!((prob(&d, "c2") - 0.6).abs() < 1e-12);
    }

    #[test]
    fn clip_and_type_multiplier() {
        let g = graph(
            &[("a", "A"), ("b", "B"), ("c2", "C")],
            vec![fact("f1", "a", "b", 100.0), Edge::synonym("s1", "a", "c2", 5.0)],
        );
        let d = transition_distribution(&g, &SamplerConfig::default(), &"a".into()).unwrap();
        assert!((prob(&d, "b") - 2.0 / 3.0).abs() < 1e-12);
        assert!((prob(&d, "c2") - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn chunk_neighbors_are_excluded() {
        let mut g = graph(&[("a", "A"), ("b", "B")], vec![fact("f", "a", "b", 1.0)]);
        g.add_edge(Edge::entity_chunk("ec", "a", "c")).unwrap();
        let d = transition_distribution(&g, &SamplerConfig::default(), &"a".into()).unwrap();
        assert_eq!(d.len(), 1);
        let mut g = graph(&[("solo", "Solo")], vec![]);
        g.add_edge(Edge::entity_chunk("ec", "solo", "c")).unwrap();
        assert!(matches!(
            transition_distribution(&g, &SamplerConfig::default(), &"solo".into()),
            Err(Error::EmptyDistribution(_))
        ));
    }

    #[test]
    fn walk_stops_at_dead_end_and_is_seeded() {
        let g = graph(&[("a", "A"), ("b", "B")], vec![fact("f", "a", "b", 1.0)]);
        let cfg = SamplerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_walk(&g, &cfg, &"a".into(), &mut rng);
        // a <-> b bounces; every step is forced.
        assert_eq!(w.len(), cfg.walk_length + 1);

        let g = graph(
            &[("a", "A"), ("b", "B"), ("c2", "C"), ("d", "D")],
            vec![fact("f1", "a", "b", 1.0), fact("f2", "b", "c2", 1.0), fact("f3", "b", "d", 2.0)],
        );
        let walk = |seed| random_walk(&g, &cfg, &"a".into(), &mut ChaCha8Rng::seed_from_u64(seed));
        assert_eq!(walk(9), walk(9));
    }

    #[test]
    fn star_yields_view() {
        let leaves = ["l1", "l2", "l3", "l4", "l5", "l6"];
        let mut nodes = vec![("r", "Root")];
        nodes.extend(leaves.iter().map(|l| (*l, *l)));
        let edges = leaves.iter().map(|l| fact(&format!("f{l}"), "r", l, 1.0)).collect();
        let g = graph(&nodes, edges);
        let cfg = SamplerConfig {
            walks_per_root: 20,
            ..SamplerConfig::default()
        };
        let view = sample_subgraph(&g, &cfg, &"r".into(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(view.nodes.contains(&"r".into()));
        assert!(view.nodes.len() >= 5);
        assert_eq!(view.edges, induced_edges(&g, &view.nodes.iter().cloned().collect()));
    }

    #[test]
    fn small_component_is_filtered() {
        let g = graph(&[("a", "A"), ("b", "B")], vec![fact("f", "a", "b", 1.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_subgraph(&g, &SamplerConfig::default(), &"a".into(), &mut rng).is_none());
    }

    #[test]
    fn synonym_only_component_is_filtered() {
        let ids = ["a", "b", "c2", "d", "e"];
        let nodes: Vec<_> = ids.iter().map(|i| (*i, *i)).collect();
        let edges = ids
            .windows(2)
            .enumerate()
            .map(|(k, w)| Edge::synonym(format!("s{k}"), w[0], w[1], 1.0))
            .collect();
        let g = graph(&nodes, edges);
        let cfg = SamplerConfig {
            walks_per_root: 50,
            ..SamplerConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_subgraph(&g, &cfg, &"a".into(), &mut rng).is_none());
    }

    #[test]
    fn unit_expansion_matches_standard_sampling() {
        let ids = ["a", "b", "c2", "d", "e", "f"];
        let nodes: Vec<_> = ids.iter().map(|i| (*i, *i)).collect();
        let edges = ids
            .windows(2)
            .enumerate()
            .map(|(k, w)| fact(&format!("f{k}"), w[0], w[1], 1.0))
            .collect();
        let g = graph(&nodes, edges);
        let cfg = SamplerConfig {
            intact_expansion_factor: 1.0,
            ..SamplerConfig::default()
        };
        for seed in 0..10 {
            let a = sample_subgraph(&g, &cfg, &"c2".into(), &mut ChaCha8Rng::seed_from_u64(seed));
            let b = sample_intact_view(&g, &cfg, &"c2".into(), &mut ChaCha8Rng::seed_from_u64(seed));
            match (a, b) {
                (Some(a), Some(b)) => {
                    assert_eq!(a.nodes, b.nodes);
                    assert_eq!(a.edges, b.edges);
                    assert_eq!(b.label, ViewLabel::Intact);
                }
                (None, None) => {}
                _ => panic!("expansion factor 1 must not change the outcome"),
            }
        }
    }

    #[test]
    fn intact_view_saturates_small_component() {
        let ids = ["a", "b", "c2", "d", "e"];
        let nodes: Vec<_> = ids.iter().map(|i| (*i, *i)).collect();
        let mut edges: Vec<Edge> = Vec::new();
        for i in 0..ids.len() {
            for j in i + 1..ids.len() {
                edges.push(fact(&format!("f{i}{j}"), ids[i], ids[j], 1.0));
            }
        }
        let g = graph(&nodes, edges);
        let view = sample_intact_view(&g, &SamplerConfig::default(), &"a".into(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(view.nodes.len(), 5);
        assert_eq!(view.edges.len(), 10);
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::default().validate().is_ok());
        let bad = SamplerConfig {
            synonym_multiplier: 1.0,
            ..SamplerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SamplerConfig {
            intact_expansion_factor: 0.5,
            ..SamplerConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
