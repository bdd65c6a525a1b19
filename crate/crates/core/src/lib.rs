//! Information-theoretic quantities about learning algorithms.
//!
//! The crate covers smooth sample information computed from linearized
//! network dynamics, supersample f-CMI generalization estimates, Fano-type
//! bounds under label noise, supervision complexity for distillation, and an
//! exact simulator of a partition-learner counterexample to sample-wise
//! bounds.

pub mod numkit;
pub mod io;
pub mod netkit;
pub mod kernels;
pub mod sampleinfo;
pub mod stats;
pub mod labelnoise;
pub mod synth;
pub mod fcmi;
pub mod counterexample;
pub mod distill;
