//! Multilayer perceptron with ReLU hidden layers, trained by Adam.
//!
//! Everything here is generic over [`Scalar`] (`f32` or `f64`).

mod adam;
mod io;
mod loss;
mod mlp;
mod scalar;
mod train;

pub use adam::{adam_step, AdamState};
pub use io::{decode_model, encode_model, load_model, save_model, MAGIC, VERSION};
pub use loss::{bce_loss, cross_entropy_loss, CLAMP};
pub use mlp::{
    argmax_rows, init_model, loss_for, sigmoid, ForwardCache, Gradients, Layer, Mlp, MlpArch,
    OutputHead,
};
pub use scalar::{gemm, Scalar};
pub use train::{
    evaluate_accuracy, evaluate_samples, train, EpochStats, LabeledMatrix, TrainConfig, TrainReport,
};
