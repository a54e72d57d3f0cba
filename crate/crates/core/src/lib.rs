//! Differential distinguishers for round-reduced PRESENT-80 and Simeck64/128.
//!
//! The crate generates chosen-plaintext output-difference datasets, trains a
//! small multilayer perceptron to recognise which input differential produced
//! each output difference, runs an offline/online oracle distinguisher on top
//! of the trained model, and provides classical difference-distribution
//! baselines to sanity check everything.
//!
//! The network code in [`nn`] is generic over the floating-point scalar;
//! [`Mlp32`] is used for training and [`Mlp64`] for gradient checks.

pub mod baseline;
pub mod cipher;
pub mod diffgen;
pub mod distinguisher;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod present;
pub mod rng;
pub mod simeck;

/// A 64-bit block: plaintext, ciphertext, round state or XOR difference.
pub type Block64 = u64;

pub type Mlp32 = nn::Mlp<f32>;
pub type Mlp64 = nn::Mlp<f64>;
pub type Adam32 = nn::AdamState<f32>;
pub type Adam64 = nn::AdamState<f64>;

pub use cipher::{CipherKind, RoundReduced};
pub use diffgen::{DiffClassSet, DiffDataset, DiffSample};
pub use error::{BaselineError, CipherError, DiffError, DistinguishError, ExperimentError, ModelError};
pub use nn::{MlpArch, Scalar, TrainConfig, TrainReport};
