//! Typed message-passing scorer that estimates how likely a subgraph view
//! is missing facts.

pub mod checkpoint;
pub mod forward;
pub mod model;
pub mod train;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, load_checkpoint_for, save_checkpoint};
pub use forward::{
    backward, backward_prepared, bce_loss, encode, encode_prepared, pool, score, score_prepared, sigmoid,
    PreparedView, Score, BCE_EPSILON,
};
pub use model::{MissingnessModel, ModelConfig, Params, Relation, MESSAGE_LAYERS, RELATIONS};
pub use train::{batch_gradient, train, train_with, Adam, TrainConfig, TrainReport};
