//! Smooth sample information: how much the trained weights (USI) or the
//! trained predictions (F-SI) move when one example is left out, measured as
//! a KL divergence between Gaussian-smoothed outcomes.
//!
//! Leave-one-out solutions come from the closed-form linearized dynamics, so
//! nothing is retrained.

mod loo;
mod smoothing;
mod summarize;
mod unique;

pub use loo::{fsi, loo_weight_deltas, FsiScorer, InfoConfig, LooDelta};
pub use smoothing::{langevin_usi, usi, usi_isotropic_from_kernel, Smoothing};
pub use summarize::{scores_csv, summarize, RemovalEvent, SampleScore, Strategy, Summary};
pub use unique::{unique_info_check, ToyAlgorithm, UniqueInfoCheck};

use thiserror::Error;

use crate::kernels::KernelError;
use crate::numkit::NumError;

#[derive(Debug, Error)]
pub enum InfoError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("Θ₀ + λI is singular (min eigenvalue {min_eigenvalue:e}); use weight_decay > 0")]
    Singular { min_eigenvalue: f64 },
    #[error("smoothing covariance is singular or not positive definite")]
    SingularSmoothing,
    #[error("empty probe set")]
    EmptyProbes,
    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, InfoError>;

impl From<crate::netkit::NetError> for InfoError {
    fn from(e: crate::netkit::NetError) -> Self {
        InfoError::Kernel(KernelError::Net(e))
    }
}
