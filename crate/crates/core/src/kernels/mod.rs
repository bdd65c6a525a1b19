//! Tangent kernels of a network at fixed weights, closed-form linearized
//! gradient-descent dynamics, and related second-moment matrices.
//!
//! Jacobian rows are ordered example-major: row `i·k + c` is `∇_w f_c(x_i)`,
//! so an NTK over `n` examples with `k` outputs is `nk × nk`.

mod dynamics;
mod ntk;
mod similarity;

pub use dynamics::{
    coefficient_gain, linearized_solution, solve_coefficients, DynMode, LinDynConfig,
    LinearizedSolution,
};
pub use ntk::{
    build_ntk, cross_ntk, fisher_matrix, jacobian_features, per_example_gradients, sgd_noise_cov,
    FisherMatrix, JacobianSketch, NtkMatrix, DEFAULT_NTK_CAP,
};
pub use similarity::{kernel_similarity, DenseOperator, FeatureOperator, KernelOperator, NtkOperator, SimilarityEstimate};

use thiserror::Error;

use crate::netkit::NetError;
use crate::numkit::NumError;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("kernel dimension {dim} exceeds the cap {cap} (n·k = {dim}); use fewer examples or raise the cap")]
    TooLarge { dim: usize, cap: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("every probe produced a zero kernel product")]
    DegenerateProbes,
}

pub type Result<T> = std::result::Result<T, KernelError>;
