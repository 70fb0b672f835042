//! Toric-code simulation, exact minimum-weight matching, an exact value
//! table for small lattices, and a deep Q-learning decoder built on a
//! from-scratch convolutional network.

pub mod agent;
pub mod analytic;
pub mod evalharness;
pub mod lattice;
pub mod matching;
pub mod mcc_oracle;
pub mod neural;
pub mod noise;
pub mod perspectives;
pub mod replay;
pub mod trainer;

pub use agent::{decode_episode, DecodeTrace, Outcome};
pub use evalharness::{Decoder, EvalResult};
pub use lattice::{CodeDistance, HomologyClass, Pauli, PauliFrame, QubitIndex, Sublattice, Syndrome};
pub use neural::{QNetwork, QNetworkConfig};
pub use noise::NoiseModel;
pub use perspectives::{Observation, Perspective};
pub use replay::Transition;
pub use trainer::{train, TrainingConfig, TrainingMetrics};
