//! Supervision complexity of targets under a kernel, margin-bound
//! evaluators, and offline/online knowledge distillation with per-epoch
//! tracking of fidelity, kernel similarity and target complexity.

mod complexity;
mod margin;
mod online;

pub use complexity::{
    aligned_kernel, centered_soft_targets, min_norm_interpolant_check, supervision_complexity, ComplexityValues,
    MinNormReport, DEFAULT_LAMBDA_SWEEP,
};
pub use margin::{distillation_bound_rhs, gamma_sweep, margin_bound_rhs, margin_loss, MarginBound, MarginInputs};
pub use online::{
    checkpoint_schedule, online_distill, supervising_checkpoint, DistillOutcome, EpochRecord, KdConfig, KdLossKind,
    TeacherTrajectory, TrackingConfig,
};

use thiserror::Error;

use crate::kernels::KernelError;
use crate::netkit::NetError;
use crate::numkit::NumError;

#[derive(Debug, Error)]
pub enum DistillError {
    #[error("invalid distillation input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Num(#[from] NumError),
}

pub type Result<T> = std::result::Result<T, DistillError>;
