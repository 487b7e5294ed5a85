use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

string_id!(NodeId);
string_id!(EdgeId);
string_id!(
    /// Identifier of a text chunk. Chunk nodes use the same string as their node id.
    ChunkId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeType {
    Entity,
    Chunk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeType {
    Fact,
    Synonym,
    EntityChunk,
}

impl EdgeType {
    pub const ALL: [EdgeType; 3] = [EdgeType::Fact, EdgeType::Synonym, EdgeType::EntityChunk];

    /// Fact and synonym edges connect two entities.
    pub fn is_entity_entity(self) -> bool {
        matches!(self, EdgeType::Fact | EdgeType::Synonym)
    }
}

/// Where a fact edge came from: the original extractor or graph completion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeOrigin {
    #[default]
    Extracted,
    Completion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub node_type: NodeType,
    pub label: String,
    /// Embedding of the label (entities) or chunk text (chunks). `None` until computed.
    pub feature: Option<Vec<f64>>,
    /// Fields from the graph file this crate does not interpret.
    pub extra: Map<String, Value>,
}

impl Node {
    pub fn entity(id: impl Into<NodeId>, label: impl Into<String>) -> Self {
        Node {
            id: id.into(),
            node_type: NodeType::Entity,
            label: label.into(),
            feature: None,
            extra: Map::new(),
        }
    }

    pub fn chunk(id: impl Into<NodeId>, label: impl Into<String>) -> Self {
        Node {
            node_type: NodeType::Chunk,
            ..Node::entity(id, label)
        }
    }

    pub fn with_feature(mut self, feature: Vec<f64>) -> Self {
        self.feature = Some(feature);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub u: NodeId,
    pub v: NodeId,
    pub edge_type: EdgeType,
    pub weight: f64,
    /// Relation label; present on fact edges only.
    pub relation: Option<String>,
    /// Supporting chunks; nonempty on fact edges.
    pub provenance: BTreeSet<ChunkId>,
    pub origin: EdgeOrigin,
    pub extra: Map<String, Value>,
}

impl Edge {
    pub fn fact(
        id: impl Into<EdgeId>,
        subject: impl Into<NodeId>,
        relation: impl Into<String>,
        object: impl Into<NodeId>,
        provenance: impl IntoIterator<Item = ChunkId>,
    ) -> Self {
        Edge {
            id: id.into(),
            u: subject.into(),
            v: object.into(),
            edge_type: EdgeType::Fact,
            weight: 1.0,
            relation: Some(relation.into()),
            provenance: provenance.into_iter().collect(),
            origin: EdgeOrigin::Extracted,
            extra: Map::new(),
        }
    }

    pub fn synonym(
        id: impl Into<EdgeId>,
        u: impl Into<NodeId>,
        v: impl Into<NodeId>,
        weight: f64,
    ) -> Self {
        Edge {
            id: id.into(),
            u: u.into(),
            v: v.into(),
            edge_type: EdgeType::Synonym,
            weight,
            relation: None,
            provenance: BTreeSet::new(),
            origin: EdgeOrigin::Extracted,
            extra: Map::new(),
        }
    }

    pub fn entity_chunk(id: impl Into<EdgeId>, entity: impl Into<NodeId>, chunk: impl Into<NodeId>) -> Self {
        Edge {
            edge_type: EdgeType::EntityChunk,
            weight: 1.0,
            ..Edge::synonym(id, entity, chunk, 1.0)
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    /// The endpoint opposite `node`, or `None` if `node` is not an endpoint.
    pub fn other(&self, node: &NodeId) -> Option<&NodeId> {
        if &self.u == node {
            Some(&self.v)
        } else if &self.v == node {
            Some(&self.u)
        } else {
            None
        }
    }
}

/// Case-folded, whitespace-collapsed form of a label.
pub fn normalize_label(label: &str) -> String {
    label
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Identity of a fact: normalized subject, relation and object labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TripleKey {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl TripleKey {
    pub fn new(subject: &str, relation: &str, object: &str) -> Self {
        TripleKey {
            subject: normalize_label(subject),
            relation: normalize_label(relation),
            object: normalize_label(object),
        }
    }
}

impl fmt::Display for TripleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} | {} | {})", self.subject, self.relation, self.object)
    }
}
