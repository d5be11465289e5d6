//! Network building blocks assembled from tape primitives.

pub mod attention;
pub mod conv;
pub mod dense;
pub mod heads;
pub mod network;
pub mod pooling;
pub mod recurrent;

pub use attention::{Attention, AttentionHead};
pub use conv::{receptive_field, Conv1d, ConvSpec, Pooling};
pub use dense::{Dense, Mlp};
pub use heads::{HeadKind, OutputHead};
pub use network::{parse_descriptor, LayerSpec, Network, PoolSpec};
pub use pooling::{residual, Attentive, PoolingHead};
pub use recurrent::{CellKind, CellState, RecurrentCell};
