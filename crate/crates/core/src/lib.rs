//! Supervised prototypical contrastive learning: per-class representation
//! queues, prototype-augmented contrastive losses, a distance-based
//! curriculum and center-matching evaluation, on a small trainable encoder.

pub mod curriculum;
pub mod data;
pub mod encoder;
pub mod error;
pub mod losses;
pub mod numerics;
pub mod protomem;
pub mod trainer;

pub use curriculum::ClassCenters;
pub use data::{Conversation, LabelTable, Turn, VectorExample};
pub use encoder::{Encoder, ToyEncoder};
pub use error::{Error, Result};
pub use losses::{LossConfig, LossOutput};
pub use numerics::Matrix;
pub use protomem::{PrototypeSet, QueueBank};
pub use trainer::{evaluate, train, LossKind, MetricsReport, OptimizerConfig, TrainConfig, TrainedModel};

/// The portable random source used throughout: identical streams on every
/// platform for a given seed.
pub type SeededRng = rand_chacha::ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    <SeededRng as rand::SeedableRng>::seed_from_u64(seed)
}
