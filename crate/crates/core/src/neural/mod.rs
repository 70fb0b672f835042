//! Small convolutional Q-network: periodic/zero/valid padded 3×3 convolutions
//! with rectified-linear activations, a dense head, reverse-mode gradients,
//! Adam and a checksummed checkpoint format.

mod adam;
mod checkpoint;
mod config;
mod network;
mod scalar;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, CHECKPOINT_VERSION};
pub use config::{ConvSpec, Padding, QNetworkConfig};
pub use network::{weighted_l1_grad, ForwardCache, LossKind, QNetwork, Tensor};
pub use scalar::Scalar;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("backward called without a forward cache")]
    MissingCache,
    #[error("architecture mismatch: {0}")]
    ArchitectureMismatch(String),
    #[error("invalid architecture: {0}")]
    InvalidConfig(String),
    #[error("checkpoint version mismatch: {0}")]
    VersionMismatch(String),
    #[error("checkpoint corrupt: {0}")]
    CorruptFile(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
