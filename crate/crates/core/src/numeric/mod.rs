//! Numeric substrate shared by every learned field: row-major matrices,
//! seeded RNG streams, MLPs with hand-written backprop, Adam and checkpoints.

mod adam;
mod checkpoint;
mod embed;
mod matrix;
mod mlp;
mod rng;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{ModelCheckpoint, NetCheckpoint, NetRecord, FORMAT_VERSION};
pub use embed::time_embed;
pub(crate) use embed::time_embed_into;
pub use matrix::Matrix;
pub use mlp::{Activation, Layer, MlpGrads, MlpNet, Trace};
pub use rng::Rng;
