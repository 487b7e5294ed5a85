//! The heterogeneous graph index: typed nodes and edges, chunk provenance,
//! the line-delimited file format, and node-feature providers.

pub mod embed;
pub mod index;
pub mod io;
pub mod types;

pub use embed::{embed_text, EmbeddingProvider, HttpEmbedder, HttpEmbedderConfig, MockEmbedder};
pub use index::{Adjacency, Chunk, GraphIndex, GraphStats, StatsDelta, Upsert};
pub use io::{load_graph, read_graph, save_graph, write_graph};
pub use types::{normalize_label, ChunkId, Edge, EdgeId, EdgeOrigin, EdgeType, Node, NodeId, NodeType, TripleKey};
