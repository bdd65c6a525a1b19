//! Label-noise memorization: a Fano-type lower bound on training error, the
//! capacity of noisy gradient channels, and a trainer whose classifier
//! receives predicted rather than actual label gradients.

mod fano;
mod limit;
mod noise;

pub use fano::{binary_entropy, fano_curve, fano_lower_bound, gradient_capacity_bound, FanoInputs, FANO_TOL};
pub use limit::{
    limit_step, limit_train, soft_reg_loss, soft_reg_train, EpochMetrics, LimitConfig, LimitOutcome,
    LimitStep, QDist, SoftRegValue,
};
pub use noise::NoiseModel;

use thiserror::Error;

use crate::netkit::NetError;

#[derive(Debug, Error)]
pub enum NoiseError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Net(#[from] NetError),
}

pub type Result<T> = std::result::Result<T, NoiseError>;
