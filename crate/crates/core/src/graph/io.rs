//! Line-delimited graph files.
//!
//! One JSON object per line, discriminated by `"kind"`:
//!
//! ```text
//! {"kind":"chunk","id":"c1","text":"..."}
//! {"kind":"node","id":"e1","type":"entity","label":"Paris","feature":[...]}
//! {"kind":"edge","id":"f1","u":"e1","v":"e2","type":"fact","weight":1.0,"relation":"capital of","provenance":["c1"]}
//! ```
//!
//! Fields this crate does not know about are kept and written back.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::index::{Chunk, GraphIndex};
use super::types::{ChunkId, Edge, EdgeId, EdgeOrigin, EdgeType, Node, NodeId, NodeType};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct ChunkRecord {
    id: ChunkId,
    text: String,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRecord {
    id: NodeId,
    #[serde(rename = "type")]
    node_type: NodeType,
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature: Option<Vec<f64>>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRecord {
    id: EdgeId,
    u: NodeId,
    v: NodeId,
    #[serde(rename = "type")]
    edge_type: EdgeType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Vec<ChunkId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin: Option<EdgeOrigin>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

enum Record {
    Chunk(ChunkRecord),
    Node(NodeRecord),
    Edge(EdgeRecord),
}

fn parse_line(line: &str, lineno: usize) -> Result<Record> {
    let perr = |message: String| Error::Parse { line: lineno, message };
    let mut value: Value = serde_json::from_str(line).map_err(|e| perr(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| perr("record is not a JSON object".into()))?;
    let kind = match obj.remove("kind") {
        Some(Value::String(k)) => k,
        Some(_) => return Err(perr("\"kind\" must be a string".into())),
        None => return Err(perr("record has no \"kind\"".into())),
    };
    let record = match kind.as_str() {
        "chunk" => Record::Chunk(serde_json::from_value(value).map_err(|e| perr(e.to_string()))?),
        "node" => Record::Node(serde_json::from_value(value).map_err(|e| perr(e.to_string()))?),
        "edge" => Record::Edge(serde_json::from_value(value).map_err(|e| perr(e.to_string()))?),
        other => return Err(perr(format!("unknown record kind {other:?}"))),
    };
    Ok(record)
}

fn tag(line: usize, err: Error) -> Error {
    match err {
        Error::Integrity { line: None, message } => Error::integrity_at(line, message),
        other => other,
    }
}

/// Parses a graph from any reader. Records may appear in any order.
pub fn read_graph<R: Read>(reader: R) -> Result<GraphIndex> {
    let mut chunks = Vec::new();
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line, lineno)? {
            Record::Chunk(c) => chunks.push((lineno, c)),
            Record::Node(n) => nodes.push((lineno, n)),
            Record::Edge(e) => edges.push((lineno, e)),
        }
    }

    let mut g = GraphIndex::new();
    for (line, c) in chunks {
        g.insert_chunk(
            c.id,
            Chunk {
                text: c.text,
                extra: c.extra,
            },
        )
        .map_err(|e| tag(line, e))?;
    }
    for (line, n) in nodes {
        let node = Node {
            id: n.id,
            node_type: n.node_type,
            label: n.label,
            feature: n.feature,
            extra: n.extra,
        };
        g.add_node(node).map_err(|e| tag(line, e))?;
    }
    for (line, e) in edges {
        let provenance: BTreeSet<ChunkId> = e.provenance.unwrap_or_default().into_iter().collect();
        let edge = Edge {
            id: e.id,
            u: e.u,
            v: e.v,
            edge_type: e.edge_type,
            weight: e.weight.unwrap_or(1.0),
            relation: e.relation,
            provenance,
            origin: e.origin.unwrap_or_default(),
            extra: e.extra,
        };
        g.add_edge(edge).map_err(|e| tag(line, e))?;
    }
    let chunk_nodes: Vec<&NodeId> = g
        .nodes()
        .filter(|n| n.node_type == NodeType::Chunk && g.chunk_text(&ChunkId(n.id.0.clone())).is_none())
        .map(|n| &n.id)
        .collect();
    if let Some(id) = chunk_nodes.first() {
        return Err(Error::integrity(format!("chunk node {id} has no chunk record")));
    }
    Ok(g)
}

/// Writes chunks, then nodes, then edges, each sorted by id.
pub fn write_graph<W: Write>(g: &GraphIndex, writer: W) -> std::io::Result<()> {
    let mut w = BufWriter::new(writer);
    let mut emit = |kind: &str, value: Value| -> std::io::Result<()> {
        let mut obj = Map::new();
        obj.insert("kind".into(), Value::String(kind.into()));
        if let Value::Object(fields) = value {
            obj.extend(fields);
        }
        serde_json::to_writer(&mut w, &obj)?;
        w.write_all(b"\n")
    };
    for (id, _) in g.chunks() {
        let chunk = g.chunk(id).expect("listed chunk exists");
        let rec = ChunkRecord {
            id: id.clone(),
            text: chunk.text.clone(),
            extra: chunk.extra.clone(),
        };
        emit("chunk", serde_json::to_value(rec)?)?;
    }
    for n in g.nodes() {
        let rec = NodeRecord {
            id: n.id.clone(),
            node_type: n.node_type,
            label: n.label.clone(),
            feature: n.feature.clone(),
            extra: n.extra.clone(),
        };
        emit("node", serde_json::to_value(rec)?)?;
    }
    for e in g.edges() {
        let rec = EdgeRecord {
            id: e.id.clone(),
            u: e.u.clone(),
            v: e.v.clone(),
            edge_type: e.edge_type,
            weight: Some(e.weight),
            relation: e.relation.clone(),
            provenance: (!e.provenance.is_empty()).then(|| e.provenance.iter().cloned().collect()),
            origin: (e.origin != EdgeOrigin::Extracted).then_some(e.origin),
            extra: e.extra.clone(),
        };
        emit("edge", serde_json::to_value(rec)?)?;
    }
    w.flush()
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<GraphIndex> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_graph(file)
}

pub fn save_graph(g: &GraphIndex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_graph(g, file).map_err(|e| Error::io(path, e))
}
