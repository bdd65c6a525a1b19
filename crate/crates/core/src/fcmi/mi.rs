use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    /// Nats; biased upward by O(1/samples).
    pub value: f64,
    pub support_a: usize,
    pub support_b: usize,
    pub samples: usize,
}

/// `Σ p(a,b) log(p(a,b)/(p(a)p(b)))` for non-negative weights (normalized
/// internally), clamped at 0.
pub fn mi_from_weights<A: Ord + Clone, B: Ord + Clone>(weights: &BTreeMap<(A, B), f64>) -> f64 {
    let total: f64 = weights.values().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let mut pa: BTreeMap<&A, f64> = BTreeMap::new();
    let mut pb: BTreeMap<&B, f64> = BTreeMap::new();
    for ((a, b), w) in weights {
        *pa.entry(a).or_default() += w / total;
        *pb.entry(b).or_default() += w / total;
    }
    if pa.len() < 2 || pb.len() < 2 {
        return 0.0;
    }
    let mut mi = 0.0;
    for ((a, b), w) in weights {
        let p = w / total;
        if p > 0.0 {
            mi += p * (p / (pa[a] * pb[b])).ln();
        }
    }
    mi.max(0.0)
}

/// Plug-in estimate from paired discrete samples.
pub fn plugin_mi<A: Ord + Clone, B: Ord + Clone>(pairs: &[(A, B)]) -> MiEstimate {
    let mut counts: BTreeMap<(A, B), f64> = BTreeMap::new();
    for p in pairs {
        *counts.entry(p.clone()).or_default() += 1.0;
    }
    let support_a = counts.keys().map(|k| &k.0).collect::<std::collections::BTreeSet<_>>().len();
    let support_b = counts.keys().map(|k| &k.1).collect::<std::collections::BTreeSet<_>>().len();
    MiEstimate { value: mi_from_weights(&counts), support_a, support_b, samples: pairs.len() }
}

/// One outcome of a toy learner: predictions on all `2n` supersample points
/// (row `2i + s`), the selector bits, and the probability of the outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactOutcome {
    pub predictions: Vec<u32>,
    pub mask: Vec<bool>,
    pub prob: f64,
}

/// Exact joint distribution of predictions and selector bits.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactJoint {
    pub n: usize,
    pub outcomes: Vec<ExactOutcome>,
}

impl ExactJoint {
    /// Uniform `J` and uniform randomness `r ∈ 0..randomness`.
    pub fn enumerate(n: usize, randomness: usize, f: impl Fn(&[bool], usize) -> Vec<u32>) -> Self {
        let count = 1usize << n;
        let prob = 1.0 / (count * randomness.max(1)) as f64;
        let mut outcomes = Vec::with_capacity(count * randomness.max(1));
        for code in 0..count {
            let mask: Vec<bool> = (0..n).map(|i| code >> i & 1 == 1).collect();
            for r in 0..randomness.max(1) {
                outcomes.push(ExactOutcome { predictions: f(&mask, r), mask: mask.clone(), prob });
            }
        }
        Self { n, outcomes }
    }

    /// `I(g(F̃); J_U)` for an arbitrary function of the outcome.
    pub fn mi_with<K: Ord + Clone>(&self, u: &[usize], g: impl Fn(&ExactOutcome) -> K) -> f64 {
        let mut w: BTreeMap<(K, Vec<bool>), f64> = BTreeMap::new();
        for o in &self.outcomes {
            let j: Vec<bool> = u.iter().map(|&i| o.mask[i]).collect();
            *w.entry((g(o), j)).or_default() += o.prob;
        }
        mi_from_weights(&w)
    }

    /// `I(F̃_U; J_U)` with `F̃_U` the predictions on both members of the pairs in `U`.
    pub fn subset_mi(&self, u: &[usize]) -> f64 {
        self.mi_with(u, |o| u.iter().flat_map(|&i| [o.predictions[2 * i], o.predictions[2 * i + 1]]).collect::<Vec<_>>())
    }

    /// Mean of `I(F̃_U; J_U)` over all subsets of size `m`.
    pub fn mean_subset_mi(&self, m: usize) -> f64 {
        let subsets: Vec<Vec<usize>> =
            (0u32..1 << self.n).filter(|c| c.count_ones() as usize == m).map(|c| (0..self.n).filter(|&i| c >> i & 1 == 1).collect()).collect();
        subsets.iter().map(|u| self.subset_mi(u)).sum::<f64>() / subsets.len().max(1) as f64
    }
}
