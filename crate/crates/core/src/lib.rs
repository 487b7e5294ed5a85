pub mod complete;
pub mod config;
pub mod corrupt;
pub mod error;
pub mod eval;
pub mod gnn;
pub mod graph;
pub mod pipeline;
pub mod sampler;
pub mod select;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
