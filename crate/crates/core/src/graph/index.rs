use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::embed::{embed_text, EmbeddingProvider};
use super::types::{
    normalize_label, ChunkId, Edge, EdgeId, EdgeOrigin, EdgeType, Node, NodeId, NodeType, TripleKey,
};
use crate::error::{Error, Result};

/// Edge ids incident to one node, split by edge type and kept sorted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Adjacency {
    pub fact: Vec<EdgeId>,
    pub synonym: Vec<EdgeId>,
    pub entity_chunk: Vec<EdgeId>,
}

impl Adjacency {
    pub fn of_type(&self, ty: EdgeType) -> &[EdgeId] {
        match ty {
            EdgeType::Fact => &self.fact,
            EdgeType::Synonym => &self.synonym,
            EdgeType::EntityChunk => &self.entity_chunk,
        }
    }

    fn of_type_mut(&mut self, ty: EdgeType) -> &mut Vec<EdgeId> {
        match ty {
            EdgeType::Fact => &mut self.fact,
            EdgeType::Synonym => &mut self.synonym,
            EdgeType::EntityChunk => &mut self.entity_chunk,
        }
    }

    fn insert(&mut self, ty: EdgeType, id: EdgeId) {
        let list = self.of_type_mut(ty);
        if let Err(pos) = list.binary_search(&id) {
            list.insert(pos, id);
        }
    }
}

/// Text of one chunk plus any fields from the graph file this crate does not interpret.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub text: String,
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// Counts used for the before/after accounting of an augmentation run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub chunks: usize,
    pub nodes: usize,
    pub entity_nodes: usize,
    pub edges: usize,
    /// Fact edges.
    pub triples: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsDelta {
    pub nodes: i64,
    pub edges: i64,
    pub triples: i64,
}

impl GraphStats {
    /// `after - before` for each count.
    pub fn delta(before: &GraphStats, after: &GraphStats) -> StatsDelta {
        let d = |a: usize, b: usize| b as i64 - a as i64;
        StatsDelta {
            nodes: d(before.nodes, after.nodes),
            edges: d(before.edges, after.edges),
            triples: d(before.triples, after.triples),
        }
    }
}

/// Result of [`GraphIndex::upsert_triple`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Upsert {
    pub edge: EdgeId,
    pub created_nodes: Vec<NodeId>,
    /// `false` when an existing edge had its weight incremented.
    pub created_edge: bool,
}

/// Heterogeneous graph index with chunk provenance.
///
/// Mutation goes through `&mut self`, so the borrow checker enforces the
/// single-writer contract; scoring passes borrow the index immutably.
#[derive(Debug, Clone, Default)]
pub struct GraphIndex {
    nodes: BTreeMap<NodeId, Node>,
    edges: BTreeMap<EdgeId, Edge>,
    chunks: BTreeMap<ChunkId, Chunk>,
    adjacency: HashMap<NodeId, Adjacency>,
    triples: HashMap<TripleKey, EdgeId>,
    entity_by_label: HashMap<String, NodeId>,
    dim: Option<usize>,
}

impl PartialEq for GraphIndex {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
            && self.edges == other.edges
            && self.chunks == other.chunks
            && self.dim == other.dim
    }
}

impl GraphIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feature dimension shared by every node, once any feature is known.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn edge(&self, id: &EdgeId) -> Option<&Edge> {
        self.edges.get(id)
    }

    pub fn chunk_text(&self, id: &ChunkId) -> Option<&str> {
        self.chunks.get(id).map(|c| c.text.as_str())
    }

    pub fn chunk(&self, id: &ChunkId) -> Option<&Chunk> {
        self.chunks.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.values()
    }

    pub fn chunks(&self) -> impl Iterator<Item = (&ChunkId, &str)> {
        self.chunks.iter().map(|(k, v)| (k, v.text.as_str()))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn adjacency(&self, id: &NodeId) -> Option<&Adjacency> {
        self.adjacency.get(id)
    }

    /// Neighbours of `id` over edges of type `ty`, as `(edge, other endpoint)`.
    pub fn neighbors<'a>(
        &'a self,
        id: &'a NodeId,
        ty: EdgeType,
    ) -> impl Iterator<Item = (&'a Edge, &'a NodeId)> + 'a {
        self.adjacency
            .get(id)
            .map(|a| a.of_type(ty))
            .unwrap_or(&[])
            .iter()
            .map(move |eid| {
                let e = &self.edges[eid];
                (e, e.other(id).expect("adjacency lists only incident edges"))
            })
    }

    /// Looks up the entity a normalized label resolves to.
    pub fn entity_by_label(&self, label: &str) -> Option<&NodeId> {
        self.entity_by_label.get(&normalize_label(label))
    }

    pub fn find_triple(&self, subject: &str, relation: &str, object: &str) -> Option<&Edge> {
        self.triples
            .get(&TripleKey::new(subject, relation, object))
            .map(|id| &self.edges[id])
    }

    /// Triple key of a fact edge, built from its endpoint labels.
    pub fn triple_key(&self, edge: &Edge) -> Option<TripleKey> {
        let relation = edge.relation.as_deref()?;
        if edge.edge_type != EdgeType::Fact {
            return None;
        }
        Some(TripleKey::new(
            &self.nodes.get(&edge.u)?.label,
            relation,
            &self.nodes.get(&edge.v)?.label,
        ))
    }

    pub fn add_chunk(&mut self, id: impl Into<ChunkId>, text: impl Into<String>) -> Result<()> {
        self.insert_chunk(
            id.into(),
            Chunk {
                text: text.into(),
                extra: Default::default(),
            },
        )
    }

    pub fn insert_chunk(&mut self, id: ChunkId, chunk: Chunk) -> Result<()> {
        if self.chunks.contains_key(&id) {
            return Err(Error::integrity(format!("duplicate chunk id {id}")));
        }
        self.chunks.insert(id, chunk);
        Ok(())
    }

    pub fn add_node(&mut self, node: Node) -> Result<()> {
        if self.nodes.contains_key(&node.id) {
            return Err(Error::integrity(format!("duplicate node id {}", node.id)));
        }
        if let Some(f) = &node.feature {
            self.check_feature(&node.id, f)?;
        }
        if node.node_type == NodeType::Entity {
            self.entity_by_label
                .entry(normalize_label(&node.label))
                .and_modify(|cur| {
                    if node.id < *cur {
                        *cur = node.id.clone();
                    }
                })
                .or_insert_with(|| node.id.clone());
        }
        self.adjacency.entry(node.id.clone()).or_default();
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    fn check_feature(&mut self, id: &NodeId, f: &[f64]) -> Result<()> {
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Error::integrity(format!("node {id} has a non-finite feature")));
        }
        match self.dim {
            Some(d) if d != f.len() => Err(Error::integrity(format!(
                "node {id} feature has dimension {}, index uses {d}",
                f.len()
            ))),
            Some(_) => Ok(()),
            None if f.is_empty() => Err(Error::integrity(format!("node {id} has an empty feature"))),
            None => {
                self.dim = Some(f.len());
                Ok(())
            }
        }
    }

    /// Adds an edge after checking endpoint types, weight and provenance.
    pub fn add_edge(&mut self, edge: Edge) -> Result<()> {
        if self.edges.contains_key(&edge.id) {
            return Err(Error::integrity(format!("duplicate edge id {}", edge.id)));
        }
        let (u, v) = match (self.nodes.get(&edge.u), self.nodes.get(&edge.v)) {
            (Some(u), Some(v)) => (u, v),
            (None, _) => {
                return Err(Error::integrity(format!("edge {} references missing node {}", edge.id, edge.u)))
            }
            (_, None) => {
                return Err(Error::integrity(format!("edge {} references missing node {}", edge.id, edge.v)))
            }
        };
        let types_ok = match edge.edge_type {
            EdgeType::Fact | EdgeType::Synonym => {
                u.node_type == NodeType::Entity && v.node_type == NodeType::Entity
            }
            EdgeType::EntityChunk => u.node_type != v.node_type,
        };
        if !types_ok {
            return Err(Error::integrity(format!(
                "edge {} of type {:?} joins {:?} and {:?} nodes",
                edge.id, edge.edge_type, u.node_type, v.node_type
            )));
        }
        if !(edge.weight.is_finite() && edge.weight >= 0.0) {
            return Err(Error::integrity(format!("edge {} has invalid weight {}", edge.id, edge.weight)));
        }
        if edge.edge_type == EdgeType::Fact {
            match edge.relation.as_deref() {
                Some(r) if !r.trim().is_empty() => {}
                _ => return Err(Error::integrity(format!("fact edge {} has no relation", edge.id))),
            }
            if edge.provenance.is_empty() {
                return Err(Error::integrity(format!("fact edge {} has empty provenance", edge.id)));
            }
            if let Some(c) = edge.provenance.iter().find(|c| !self.chunks.contains_key(*c)) {
                return Err(Error::integrity(format!("fact edge {} cites unknown chunk {c}", edge.id)));
            }
            let key = self.triple_key(&edge).expect("fact edge with known endpoints");
            if let Some(existing) = self.triples.get(&key) {
                return Err(Error::integrity(format!(
                    "fact edge {} duplicates triple {key} already stored as {existing}",
                    edge.id
                )));
            }
            self.triples.insert(key, edge.id.clone());
        }
        self.link(&edge);
        self.edges.insert(edge.id.clone(), edge);
        Ok(())
    }

    fn link(&mut self, edge: &Edge) {
        for end in [&edge.u, &edge.v] {
            self.adjacency
                .entry(end.clone())
                .or_default()
                .insert(edge.edge_type, edge.id.clone());
        }
    }

    /// Adds chunks to the provenance of an existing fact edge.
    pub fn extend_provenance(&mut self, id: &EdgeId, chunks: &BTreeSet<ChunkId>) -> Result<()> {
        if let Some(c) = chunks.iter().find(|c| !self.chunks.contains_key(*c)) {
            return Err(Error::integrity(format!("edge {id} cannot cite unknown chunk {c}")));
        }
        match self.edges.get_mut(id) {
            Some(edge) if edge.edge_type == EdgeType::Fact => {
                edge.provenance.extend(chunks.iter().cloned());
                Ok(())
            }
            Some(_) => Err(Error::integrity(format!("edge {id} is not a fact edge"))),
            None => Err(Error::integrity(format!("no edge {id}"))),
        }
    }

    /// Inserts or reinforces the fact `(subject, relation, object)`.
    ///
    /// Missing entities are created with label embeddings from `provider`.
    /// A triple that already exists gets `weight += 1` and the union of
    /// provenances instead of a second edge.
    pub fn upsert_triple(
        &mut self,
        subject: &str,
        relation: &str,
        object: &str,
        provenance: &BTreeSet<ChunkId>,
        origin: EdgeOrigin,
        provider: &dyn EmbeddingProvider,
    ) -> Result<Upsert> {
        let missing_citation = || Error::MissingCitation {
            subject: subject.into(),
            relation: relation.into(),
            object: object.into(),
        };
        if provenance.is_empty() {
            return Err(missing_citation());
        }
        for (what, label) in [("subject", subject), ("relation", relation), ("object", object)] {
            if label.trim().is_empty() {
                return Err(Error::integrity(format!("triple has an empty {what}")));
            }
        }
        if let Some(c) = provenance.iter().find(|c| !self.chunks.contains_key(*c)) {
            return Err(Error::integrity(format!("triple cites unknown chunk {c}")));
        }

        let key = TripleKey::new(subject, relation, object);
        if let Some(eid) = self.triples.get(&key).cloned() {
            let edge = self.edges.get_mut(&eid).expect("triple index points at an edge");
            edge.weight += 1.0;
            edge.provenance.extend(provenance.iter().cloned());
            return Ok(Upsert {
                edge: eid,
                created_nodes: Vec::new(),
                created_edge: false,
            });
        }

        // Embed before mutating so a provider failure leaves the graph untouched.
        let mut pending: Vec<(&str, Vec<f64>)> = Vec::new();
        for label in [subject, object] {
            let known = self.entity_by_label(label).is_some()
                || pending.iter().any(|(l, _)| normalize_label(l) == normalize_label(label));
            if !known {
                let feature = embed_text(provider, label.trim())?;
                if let Some(d) = self.dim {
                    if d != feature.len() {
                        return Err(Error::Shape(format!(
                            "provider dimension {} differs from index dimension {d}",
                            feature.len()
                        )));
                    }
                }
                pending.push((label, feature));
            }
        }

        let mut created_nodes = Vec::new();
        for (label, feature) in pending {
            let id = self.fresh_entity_id(label);
            self.add_node(Node::entity(id.clone(), label.trim()).with_feature(feature))?;
            created_nodes.push(id);
        }
        let u = self.entity_by_label(subject).cloned().expect("subject exists");
        let v = self.entity_by_label(object).cloned().expect("object exists");
        let mut edge = Edge::fact(self.fresh_edge_id(), u, relation.trim(), v, provenance.iter().cloned());
        edge.origin = origin;
        let id = edge.id.clone();
        self.add_edge(edge)?;
        Ok(Upsert {
            edge: id,
            created_nodes,
            created_edge: true,
        })
    }

    fn fresh_entity_id(&self, label: &str) -> NodeId {
        let slug: String = normalize_label(label)
            .chars()
            .map(|c| if c.is_alphanumeric() { c } else { '_' })
            .collect();
        let base = format!("ent:{slug}");
        let mut candidate = base.clone();
        let mut n = 2;
        while self.nodes.contains_key(candidate.as_str()) {
            candidate = format!("{base}~{n}");
            n += 1;
        }
        NodeId(candidate)
    }

    fn fresh_edge_id(&self) -> EdgeId {
        let mut n = self.edges.len();
        loop {
            let id = EdgeId(format!("fact:{n:06}"));
            if !self.edges.contains_key(&id) {
                return id;
            }
            n += 1;
        }
    }

    /// Computes features for nodes that lack one. Returns how many were filled.
    pub fn fill_missing_features(&mut self, provider: &dyn EmbeddingProvider) -> Result<usize> {
        if let Some(d) = self.dim {
            if d != provider.dim() {
                return Err(Error::Shape(format!(
                    "provider dimension {} differs from index dimension {d}",
                    provider.dim()
                )));
            }
        }
        let missing: Vec<(NodeId, String)> = self
            .nodes
            .values()
            .filter(|n| n.feature.is_none())
            .map(|n| {
                let text = match n.node_type {
                    NodeType::Chunk => self
                        .chunks
                        .get(n.id.as_str())
                        .map(|c| c.text.clone())
                        .unwrap_or_else(|| n.label.clone()),
                    NodeType::Entity => n.label.clone(),
                };
                (n.id.clone(), text)
            })
            .collect();
        for (id, text) in &missing {
            let f = embed_text(provider, text)?;
            self.check_feature(id, &f)?;
            self.nodes.get_mut(id).expect("node exists").feature = Some(f);
        }
        Ok(missing.len())
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            chunks: self.chunks.len(),
            nodes: self.nodes.len(),
            entity_nodes: self
                .nodes
                .values()
                .filter(|n| n.node_type == NodeType::Entity)
                .count(),
            edges: self.edges.len(),
            triples: self
                .edges
                .values()
                .filter(|e| e.edge_type == EdgeType::Fact)
                .count(),
        }
    }

    /// Rebuilds adjacency from the edge set.
    pub fn rebuilt_adjacency(&self) -> HashMap<NodeId, Adjacency> {
        let mut adj: HashMap<NodeId, Adjacency> =
            self.nodes.keys().map(|k| (k.clone(), Adjacency::default())).collect();
        for e in self.edges.values() {
            for end in [&e.u, &e.v] {
                adj.entry(end.clone()).or_default().insert(e.edge_type, e.id.clone());
            }
        }
        adj
    }

    /// Checks every structural invariant of the index.
    pub fn check_invariants(&self) -> Result<()> {
        if self.rebuilt_adjacency() != self.adjacency {
            return Err(Error::integrity("adjacency disagrees with the edge set"));
        }
        let mut keys = BTreeSet::new();
        for e in self.edges.values() {
            if !(e.weight.is_finite() && e.weight >= 0.0) {
                return Err(Error::integrity(format!("edge {} has invalid weight", e.id)));
            }
            if e.edge_type == EdgeType::Fact {
                if e.provenance.is_empty() {
                    return Err(Error::integrity(format!("fact edge {} has empty provenance", e.id)));
                }
                if let Some(c) = e.provenance.iter().find(|c| !self.chunks.contains_key(*c)) {
                    return Err(Error::integrity(format!("fact edge {} cites unknown chunk {c}", e.id)));
                }
                let key = self
                    .triple_key(e)
                    .ok_or_else(|| Error::integrity(format!("fact edge {} is malformed", e.id)))?;
                if !keys.insert(key.clone()) || self.triples.get(&key) != Some(&e.id) {
                    return Err(Error::integrity(format!("triple index inconsistent at {}", e.id)));
                }
            }
        }
        if keys.len() != self.triples.len() {
            return Err(Error::integrity("triple index has stale entries"));
        }
        for n in self.nodes.values() {
            if n.node_type == NodeType::Chunk && !self.chunks.contains_key(n.id.as_str()) {
                return Err(Error::integrity(format!("chunk node {} has no chunk text", n.id)));
            }
            if let (Some(d), Some(f)) = (self.dim, &n.feature) {
                if f.len() != d {
                    return Err(Error::integrity(format!("node {} has wrong feature dimension", n.id)));
                }
            }
        }
        Ok(())
    }
}

impl std::borrow::Borrow<str> for NodeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for ChunkId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl std::borrow::Borrow<str> for EdgeId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::embed::MockEmbedder;

    fn chunked() -> GraphIndex {
        let mut g = GraphIndex::new();
        g.add_chunk("c1", "Alpha meets Beta.").unwrap();
        g.add_chunk("c2", "Beta visits Gamma.").unwrap();
        g
    }

    fn cites(ids: &[&str]) -> BTreeSet<ChunkId> {
        ids.iter().map(|s| ChunkId::from(*s)).collect()
    }

    #[test]
    fn upsert_into_empty_graph_creates_two_nodes() {
        let mut g = chunked();
        let p = MockEmbedder::default();
        let up = g
            .upsert_triple("Alpha", "meets", "Beta", &cites(&["c1"]), EdgeOrigin::Extracted, &p)
            .unwrap();
        assert!(up.created_edge);
        assert_eq!(up.created_nodes.len(), 2);
        assert_eq!(g.stats().nodes, 2);
        assert_eq!(g.edge(&up.edge).unwrap().weight, 1.0);
        g.check_invariants().unwrap();
    }

    #[test]
    fn repeated_upsert_increments_weight() {
        let mut g = chunked();
        let p = MockEmbedder::default();
        let a = g
            .upsert_triple("Alpha", "meets", "Beta", &cites(&["c1"]), EdgeOrigin::Extracted, &p)
            .unwrap();
        let b = g
            .upsert_triple(" alpha ", "MEETS", "beta", &cites(&["c2"]), EdgeOrigin::Extracted, &p)
            .unwrap();
        assert_eq!(a.edge, b.edge);
        assert!(!b.created_edge);
        let e = g.edge(&a.edge).unwrap();
        assert_eq!(e.weight, 2.0);
        assert_eq!(e.provenance, cites(&["c1", "c2"]));
        assert_eq!(g.stats().triples, 1);
        g.check_invariants().unwrap();
    }

    #[test]
    fn empty_provenance_is_rejected() {
        let mut g = chunked();
        let before = g.clone();
        let err = g
            .upsert_triple("Alpha", "meets", "Beta", &BTreeSet::new(), EdgeOrigin::Extracted, &MockEmbedder::default())
            .unwrap_err();
        assert!(matches!(err, Error::MissingCitation { .. }));
        assert_eq!(g, before);
    }

    #[test]
    fn unknown_chunk_is_rejected() {
        let mut g = chunked();
        let err = g
            .upsert_triple("Alpha", "meets", "Beta", &cites(&["c9"]), EdgeOrigin::Extracted, &MockEmbedder::default())
            .unwrap_err();
        assert!(matches!(err, Error::Integrity { .. }));
        assert_eq!(g.node_count(), 0);
    }

    #[test]
    fn edge_type_rules() {
        let mut g = chunked();
        g.add_node(Node::entity("a", "A")).unwrap();
        g.add_node(Node::chunk("c1", "chunk one")).unwrap();
        assert!(g.add_edge(Edge::synonym("s", "a", "c1", 1.0)).is_err());
        assert!(g.add_edge(Edge::entity_chunk("ec", "a", "c1")).is_ok());
        assert!(g
            .add_edge(Edge::fact("f", "a", "r", "a", []))
            .is_err(), "fact edge without provenance");
        assert!(g.add_edge(Edge::synonym("neg", "a", "a", -1.0)).is_err());
    }

    #[test]
    fn stats_on_empty_graph() {
        assert_eq!(GraphIndex::new().stats(), GraphStats::default());
    }

    #[test]
    fn feature_dimension_is_index_wide() {
        let mut g = GraphIndex::new();
        g.add_node(Node::entity("a", "A").with_feature(vec![1.0, 0.0])).unwrap();
        assert!(g.add_node(Node::entity("b", "B").with_feature(vec![1.0])).is_err());
        assert_eq!(g.dim(), Some(2));
    }

    #[test]
    fn fill_missing_features_uses_provider() {
        let mut g = chunked();
        g.add_node(Node::entity("a", "Alpha")).unwrap();
        g.add_node(Node::chunk("c1", "c1")).unwrap();
        let p = MockEmbedder::new(16, 3);
        assert_eq!(g.fill_missing_features(&p).unwrap(), 2);
        assert_eq!(g.dim(), Some(16));
        let chunk_feature = g.node(&"c1".into()).unwrap().feature.clone().unwrap();
        assert_eq!(chunk_feature, embed_text(&p, "Alpha meets Beta.").unwrap());
        assert_eq!(g.fill_missing_features(&p).unwrap(), 0);
    }
}
