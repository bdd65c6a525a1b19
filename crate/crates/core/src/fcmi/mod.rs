//! Supersample protocol, plug-in mutual information over discrete
//! predictions, and generalization-bound evaluators.

mod bounds;
mod mi;
mod protocol;
mod stability;

pub use bounds::{
    cmi_m, cmi_squared, combined_stderr, diagnostic_mi, fcmi_bound_m1, fcmi_bound_mn, gap_summary, pairwise_squared,
    samplewise, stability_bound, stability_squared_bound, vc_fcmi_cap, xu_raginsky, xu_raginsky_squared, BoundReport,
    DiagnosticView, GapSummary,
};
pub use mi::{mi_from_weights, plugin_mi, ExactJoint, ExactOutcome, MiEstimate};
pub use protocol::{
    run_protocol, ConstantTrainer, DataSource, MaskMode, MlpTrainer, NearestNeighbor, PoolSource, PredictionTable,
    ProtocolConfig, ProtocolOutcome, RunRecord, SplitMask, Supersample, Trainer,
};
pub use stability::{measure_self_stability, stability_replicate, LeastSquares, Regressor, StabilityEstimate};

use thiserror::Error;

use crate::netkit::NetError;
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum FcmiError {
    #[error("invalid protocol: {0}")]
    Invalid(String),
    #[error("every run for supersample {0} failed")]
    AllRunsFailed(usize),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

pub type Result<T> = std::result::Result<T, FcmiError>;
