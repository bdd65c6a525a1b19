use serde::{Deserialize, Serialize};

use super::{NoiseError, Result};
use crate::numkit::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseModel {
    /// With probability `p` the label becomes a uniformly chosen other class.
    Uniform { p: f64, k: usize },
    /// With probability `p` class `c` becomes `mapping[c]`.
    Pair { mapping: Vec<usize>, p: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::Uniform { p, k } => {
                if *k < 2 || !(*p >= 0.0 && *p < (*k as f64 - 1.0) / *k as f64) {
                    return Err(NoiseError::Invalid(format!("uniform noise needs k ≥ 2 and p ∈ [0, (k−1)/k), got p={p}, k={k}")));
                }
            }
            NoiseModel::Pair { mapping, p } => {
                if !(0.0..=1.0).contains(p) || mapping.iter().any(|&m| m >= mapping.len()) {
                    return Err(NoiseError::Invalid("pair noise mapping must be a function on classes".into()));
                }
            }
        }
        Ok(())
    }

    /// `H(Y | X)` of the noisy label when the clean label is a function of `X`.
    pub fn conditional_entropy(&self) -> f64 {
        match self {
            NoiseModel::Uniform { p, k } => {
                super::binary_entropy(*p) + if *k > 2 { p * ((*k - 1) as f64).ln() } else { 0.0 }
            }
            NoiseModel::Pair { p, .. } => super::binary_entropy(*p),
        }
    }

    /// Noisy labels and which ones were changed.
    pub fn apply(&self, labels: &[usize], rng: &mut Rng) -> Result<(Vec<usize>, Vec<bool>)> {
        self.validate()?;
        let mut out = Vec::with_capacity(labels.len());
        let mut flipped = Vec::with_capacity(labels.len());
        for &y in labels {
            let new = match self {
                NoiseModel::Uniform { p, k } => {
                    if y >= *k {
                        return Err(NoiseError::Invalid(format!("label {y} outside 0..{k}")));
                    }
                    if rng.bernoulli(*p) {
                        let other = rng.below(k - 1);
                        if other >= y { other + 1 } else { other }
                    } else {
                        y
                    }
                }
                NoiseModel::Pair { mapping, p } => {
                    if y >= mapping.len() {
                        return Err(NoiseError::Invalid(format!("label {y} outside the mapping")));
                    }
                    if rng.bernoulli(*p) { mapping[y] } else { y }
                }
            };
            flipped.push(new != y);
            out.push(new);
        }
        Ok((out, flipped))
    }
}
