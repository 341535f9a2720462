//! Latent world models: shared encoder, low- and high-level predictors,
//! action encoder, training losses, and the coordinate prober.

pub mod checkpoint;
pub mod losses;
pub mod nets;
pub mod train;

pub use checkpoint::{encoder_hash, load_high, load_low, read_sidecar, save_high, save_low, Sidecar};
pub use nets::{
    chunk_features, ActionEncoder, ConvLayer, Encoder, HighModel, HighPredictor, Linear, LowModel,
    LowPredictor, ModelHyper, Prober, ProprioHead,
};
pub use train::{encode_states_raw, train_low, train_high, train_prober, TrainLogRow};
