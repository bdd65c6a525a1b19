//! Feedforward network engine: forward and backward passes, per-example
//! Jacobians, losses, and gradient-descent trainers.
//!
//! Parameter layout is layer-major: for each layer the weight matrix in
//! row-major `fan_out × fan_in` order, then the `fan_out` biases.

mod data;
mod loss;
mod mlp;
mod train;

pub use data::{argmax_rows, flatten_rows, one_hot, unflatten_rows, Dataset};
pub use loss::{log_softmax_rows, loss_and_grad, softmax_rows, Loss};
pub use mlp::{
    backward, forward, forward_cached, init_weights, jvp, per_example_jacobian, vjp, Activation,
    FlatWeights, ForwardCache, MlpSpec,
};
pub use train::{
    train, train_with, BatchSampler, Checkpoint, SgldSchedule, TrainConfig, Trajectory,
    DIVERGENCE_THRESHOLD,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape { what: &'static str, expected: String, got: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at step {step} (loss {loss:e})")]
    Diverged { step: usize, loss: f64 },
    #[error("dataset error: {0}")]
    Data(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NetError>;

pub(crate) fn shape_err(what: &'static str, expected: impl ToString, got: impl ToString) -> NetError {
    NetError::Shape { what, expected: expected.to_string(), got: got.to_string() }
}
