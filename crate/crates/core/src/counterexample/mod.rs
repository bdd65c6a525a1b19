//! Partition learner over the hypercube `{0,1}^d`.
//!
//! The hypothesis is a partition of the `N = 2^d` examples into blocks of
//! size `n`; the loss of an example is the parity of all bits in its block.
//! Exhaustive mode enumerates every partition and every training tuple, so
//! information and gap quantities come out as exact rationals.

mod lemma;
mod partition;
mod verify;

pub use lemma::{lemma_cov_check, lemma_cov_exhaustive, CovReport};
pub use partition::{
    all_partitions, ln_partition_count, parity, partitions_containing, random_partition, run_algorithm,
    AlgorithmOutput, PartitionHypothesis,
};
pub use verify::{pairwise_bound_check, verify_properties, KlCheck, PairwiseReport, PropertyReport};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper limit on `|𝒲|` for exhaustive mode.
pub const EXHAUSTIVE_PARTITION_CAP: f64 = 1e7;
/// Upper limit on `N^n · |𝒲|` for the exact joint of `(S, W)`.
pub const EXHAUSTIVE_JOINT_CAP: f64 = 1e8;

#[derive(Debug, Error)]
pub enum CexError {
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("exhaustive enumeration needs {what} ≈ {size:.3e} > {cap:.0e}; use monte_carlo mode")]
    TooLarge { what: &'static str, size: f64, cap: f64 },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, CexError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CexMode {
    Exhaustive,
    MonteCarlo { trials: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CexAlgorithm {
    /// Uniform over partitions containing `S` as a block (uniform over all on duplicates).
    #[default]
    Construction,
    /// Ignores the data and always returns consecutive blocks.
    FixedPartition,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CexConfig {
    pub d: u32,
    pub n: usize,
    pub mode: CexMode,
    #[serde(default)]
    pub algorithm: CexAlgorithm,
}

impl CexConfig {
    pub fn new(d: u32, n: usize, mode: CexMode) -> Self {
        Self { d, n, mode, algorithm: CexAlgorithm::Construction }
    }

    pub fn examples(&self) -> usize {
        1 << self.d
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.d > 24 {
            return Err(CexError::Invalid(format!("d = {} outside 1..=24", self.d)));
        }
        let big_n = self.examples();
        if self.n == 0 || self.n > big_n || big_n % self.n != 0 {
            return Err(CexError::Invalid(format!("block size {} must divide N = {big_n}", self.n)));
        }
        match self.mode {
            CexMode::Exhaustive => {
                let size = ln_partition_count(big_n, self.n).exp();
                if size > EXHAUSTIVE_PARTITION_CAP {
                    return Err(CexError::TooLarge { what: "partition count", size, cap: EXHAUSTIVE_PARTITION_CAP });
                }
            }
            CexMode::MonteCarlo { trials } => {
                if trials < 2 {
                    return Err(CexError::Invalid("monte_carlo needs at least 2 trials".into()));
                }
            }
        }
        Ok(())
    }

    /// The construction is stated for `n = 2^r` with `d > r`.
    pub fn beyond_theorem_scope(&self) -> bool {
        !self.n.is_power_of_two() || self.n >= self.examples()
    }

    pub(crate) fn warn_scope(&self) {
        if self.beyond_theorem_scope() {
            warn!("n = {}, d = {}: beyond stated theorem scope", self.n, self.d);
        }
    }
}
