use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::partition::{duplicates, fixed_partition, sample_construction};
use super::{
    all_partitions, parity, partitions_containing, CexAlgorithm, CexConfig, CexError, CexMode, PartitionHypothesis,
    Result, EXHAUSTIVE_JOINT_CAP,
};
use crate::fcmi::{mi_from_weights, plugin_mi};
use crate::numkit::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlCheck {
    /// `KL(Q_{W|S=s} ‖ P_W)` for a duplicate-free `s`; a support-size log ratio.
    pub duplicate_free_kl: f64,
    /// `n ln(N−n+1) − (n−1) ln n − ln N`.
    pub analytic_lower: f64,
    pub duplicate_free_probability: f64,
    /// Probability over `S` that the KL is at least `n − 1`.
    pub prob_kl_at_least_n_minus_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub d: u32,
    pub n: usize,
    pub mode: CexMode,
    pub algorithm: CexAlgorithm,
    pub beyond_theorem_scope: bool,
    /// Training tuples enumerated (exhaustive) or sampled.
    pub trials: usize,
    pub kl: KlCheck,
    /// `max_i I(W; Zᵢ)`; exact in exhaustive mode, a plug-in estimate otherwise.
    pub mi_single: f64,
    pub mi_single_exact: bool,
    /// Plug-in MI between `W` and an independent draw `Z′`, the estimator's
    /// reading at true independence (Monte-Carlo only).
    pub mi_single_baseline: Option<f64>,
    /// `max_{i,z} TV(P_{W|Zᵢ=z}, P_W)` (exhaustive only).
    pub max_tv: Option<f64>,
    pub marginal_uniform: Option<bool>,
    pub gap_mean: f64,
    pub gap_stderr: f64,
    pub gap_sq_mean: f64,
    /// `P(R(W) − r_S(W) ≥ ¼)`.
    pub gap_tail: f64,
    pub tail_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseReport {
    /// `E[(R(W) − r_S(W))²]`.
    pub lhs: f64,
    /// `1/n + (1/n²) Σ_{i≠k} √(2 I(W; Zᵢ, Z_k))`.
    pub rhs: f64,
    pub single_mi: Vec<f64>,
    /// `(i, k, I(W; Zᵢ, Z_k))` for `i < k`.
    pub pair_mi: Vec<(usize, usize, f64)>,
    pub holds: bool,
}

/// Integer-scaled gap: `(R − r_S)·N·n = n²·(odd blocks) − N·(losses)`.
fn scaled_gap(big_n: usize, n: usize, odd_blocks: u32, losses: u32) -> i128 {
    (n * n) as i128 * odd_blocks as i128 - big_n as i128 * losses as i128
}

fn losses_of(s: &[u32], assign: &[u32], block_parity: &[u8]) -> u32 {
    s.iter().map(|&z| block_parity[assign[z as usize] as usize] as u32).sum()
}

fn check_empirical_risk(s: &[u32], losses: u32) -> Result<()> {
    if duplicates(s) {
        return Ok(());
    }
    let set_parity = s.iter().fold(0, |acc, &z| acc ^ parity(z)) as u32;
    if losses != set_parity * s.len() as u32 {
        return Err(CexError::Invariant(format!("empirical risk of {s:?} differs from its parity")));
    }
    Ok(())
}

/// `n ln(N−n+1) − (n−1) ln n − ln N`.
fn analytic_kl_lower(big_n: usize, n: usize) -> f64 {
    n as f64 * ((big_n - n + 1) as f64).ln() - (n - 1) as f64 * (n as f64).ln() - (big_n as f64).ln()
}

/// `ln C(N−1, n−1)`, the log support ratio `|𝒲| / |𝒲_S|`.
fn ln_support_ratio(big_n: usize, n: usize) -> f64 {
    (1..n).map(|i| ((big_n - n + i) as f64 / i as f64).ln()).sum()
}

/// Mutual information of integer-weighted joint counts. Returns exactly 0
/// when the counts factorize.
fn exact_mi<A: Ord + Clone, B: Ord + Clone>(counts: &BTreeMap<(A, B), u128>) -> f64 {
    let total: u128 = counts.values().sum();
    let mut ca: BTreeMap<&A, u128> = BTreeMap::new();
    let mut cb: BTreeMap<&B, u128> = BTreeMap::new();
    for ((a, b), c) in counts {
        *ca.entry(a).or_default() += c;
        *cb.entry(b).or_default() += c;
    }
    let full_support = counts.values().filter(|&&c| c > 0).count() == ca.len() * cb.len();
    if full_support && counts.iter().all(|((a, b), c)| c * total == ca[a] * cb[b]) {
        return 0.0;
    }
    mi_from_weights(&counts.iter().map(|(k, &c)| (k.clone(), c as f64)).collect())
}

struct ExactJoint {
    big_n: usize,
    n: usize,
    hyps: Vec<PartitionHypothesis>,
    /// `(s, hypothesis id, weight)`.
    entries: Vec<(Vec<u32>, usize, u128)>,
    total: u128,
    /// Training tuples enumerated and the KL of each duplicate-free one.
    tuples: usize,
    kl_by_tuple: Vec<(bool, f64)>,
}

impl ExactJoint {
    fn build(cfg: &CexConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.mode != CexMode::Exhaustive {
            return Err(CexError::Invalid("exact checks require exhaustive mode".into()));
        }
        cfg.warn_scope();
        let big_n = cfg.examples();
        let n = cfg.n;
        let all = all_partitions(cfg)?;
        let work = (big_n as f64).powi(n as i32) * all.len() as f64;
        if work > EXHAUSTIVE_JOINT_CAP {
            return Err(CexError::TooLarge { what: "joint size N^n·|W|", size: work, cap: EXHAUSTIVE_JOINT_CAP });
        }
        let ids: HashMap<PartitionHypothesis, usize> = all.iter().cloned().enumerate().map(|(i, h)| (h, i)).collect();
        let tuples = big_n.pow(n as u32);
        let mut supports: Vec<(Vec<u32>, Vec<usize>)> = Vec::with_capacity(tuples);
        for code in 0..tuples {
            let s: Vec<u32> = (0..n).map(|i| ((code / big_n.pow(i as u32)) % big_n) as u32).collect();
            let support: Vec<usize> = match cfg.algorithm {
                CexAlgorithm::FixedPartition => vec![ids[&fixed_partition(cfg)]],
                CexAlgorithm::Construction if duplicates(&s) => (0..all.len()).collect(),
                CexAlgorithm::Construction => partitions_containing(cfg, &s)?.iter().map(|h| ids[h]).collect(),
            };
            supports.push((s, support));
        }
        // Common multiple of the support sizes gives integer weights.
        let lcm = supports.iter().fold(1u128, |acc, (_, sup)| lcm(acc, sup.len() as u128));
        let mut entries = Vec::new();
        for (s, sup) in &supports {
            let w = lcm / sup.len() as u128;
            entries.extend(sup.iter().map(|&h| (s.clone(), h, w)));
        }
        let total = lcm * tuples as u128;
        // Marginal support of W, for the KL support ratio.
        let mut marginal = vec![false; all.len()];
        for (_, h, _) in &entries {
            marginal[*h] = true;
        }
        let p_support = marginal.iter().filter(|&&m| m).count() as f64;
        let kl_by_tuple =
            supports.iter().map(|(s, sup)| (duplicates(s), (p_support / sup.len() as f64).ln())).collect();
        Ok(Self { big_n, n, hyps: all, entries, total, tuples, kl_by_tuple })
    }

    fn hyp_tables(&self) -> (Vec<Vec<u32>>, Vec<Vec<u8>>, Vec<u32>) {
        let assign: Vec<Vec<u32>> = self.hyps.iter().map(|h| h.assignment()).collect();
        let parities: Vec<Vec<u8>> = self.hyps.iter().map(|h| h.block_parities()).collect();
        let odd = parities.iter().map(|p| p.iter().map(|&b| b as u32).sum()).collect();
        (assign, parities, odd)
    }

    /// Exact `I(W; Z_U)` for a set of positions `U`.
    fn mi_with_positions(&self, positions: &[usize]) -> f64 {
        let mut counts: BTreeMap<(usize, Vec<u32>), u128> = BTreeMap::new();
        for (s, h, w) in &self.entries {
            *counts.entry((*h, positions.iter().map(|&i| s[i]).collect())).or_default() += w;
        }
        exact_mi(&counts)
    }

    fn max_tv(&self, i: usize) -> f64 {
        let mut cw = vec![0u128; self.hyps.len()];
        let mut cz = vec![0u128; self.big_n];
        let mut joint: BTreeMap<(u32, usize), u128> = BTreeMap::new();
        for (s, h, w) in &self.entries {
            cw[*h] += w;
            cz[s[i] as usize] += w;
            *joint.entry((s[i], *h)).or_default() += w;
        }
        let mut worst = 0.0f64;
        for z in 0..self.big_n {
            if cz[z] == 0 {
                continue;
            }
            // Σ_w |c(w,z)·T − c(w)·c(z)|, with absent cells contributing c(w)·c(z).
            let mut diff: u128 = 0;
            let mut covered: u128 = 0;
            for ((_, h), &c) in joint.range((z as u32, 0)..=(z as u32, usize::MAX)) {
                let (a, b) = (c * self.total, cw[*h] * cz[z]);
                diff += a.abs_diff(b);
                covered += cw[*h];
            }
            diff += (self.total - covered) * cz[z];
            worst = worst.max(diff as f64 / (2.0 * cz[z] as f64 * self.total as f64));
        }
        worst
    }
}

fn lcm(a: u128, b: u128) -> u128 {
    fn gcd(a: u128, b: u128) -> u128 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Properties of the learner: KL lower bound, single-example independence,
/// zero expected gap, and a heavy gap tail.
pub fn verify_properties(cfg: &CexConfig, seed: u64) -> Result<PropertyReport> {
    cfg.validate()?;
    match cfg.mode {
        CexMode::Exhaustive => verify_exhaustive(cfg),
        CexMode::MonteCarlo { trials } => verify_monte_carlo(cfg, trials, seed),
    }
}

fn verify_exhaustive(cfg: &CexConfig) -> Result<PropertyReport> {
    let joint = ExactJoint::build(cfg)?;
    let (big_n, n) = (joint.big_n, joint.n);
    let (assign, parities, odd) = joint.hyp_tables();
    let nn = (big_n * n) as f64;
    let (mut sum_g, mut sum_g2, mut tail) = (0i128, 0u128, 0u128);
    let mut cw = vec![0u128; joint.hyps.len()];
    for (s, h, w) in &joint.entries {
        let losses = losses_of(s, &assign[*h], &parities[*h]);
        if cfg.algorithm == CexAlgorithm::Construction {
            check_empirical_risk(s, losses)?;
        }
        let g = scaled_gap(big_n, n, odd[*h], losses);
        sum_g += *w as i128 * g;
        sum_g2 += w * (g * g) as u128;
        if 4 * g >= (big_n * n) as i128 {
            tail += w;
        }
        cw[*h] += w;
    }
    let total = joint.total as f64;
    let marginal_uniform = cw.iter().all(|&c| c == cw[0]);
    let mi: Vec<f64> = (0..n).map(|i| joint.mi_with_positions(&[i])).collect();
    let max_tv = (0..n).map(|i| joint.max_tv(i)).fold(0.0, f64::max);
    let tuples = joint.tuples as f64;
    let free: Vec<f64> = joint.kl_by_tuple.iter().filter(|(dup, _)| !dup).map(|t| t.1).collect();
    let kl = KlCheck {
        duplicate_free_kl: free.iter().copied().fold(f64::INFINITY, f64::min),
        analytic_lower: analytic_kl_lower(big_n, n),
        duplicate_free_probability: free.len() as f64 / tuples,
        prob_kl_at_least_n_minus_1: joint.kl_by_tuple.iter().filter(|t| t.1 >= (n - 1) as f64).count() as f64 / tuples,
    };
    Ok(PropertyReport {
        d: cfg.d,
        n,
        mode: cfg.mode,
        algorithm: cfg.algorithm,
        beyond_theorem_scope: cfg.beyond_theorem_scope(),
        trials: joint.tuples,
        kl,
        mi_single: mi.iter().copied().fold(0.0, f64::max),
        mi_single_exact: true,
        mi_single_baseline: None,
        max_tv: Some(max_tv),
        marginal_uniform: Some(marginal_uniform),
        gap_mean: sum_g as f64 / (total * nn),
        gap_stderr: 0.0,
        gap_sq_mean: sum_g2 as f64 / (total * nn * nn),
        gap_tail: tail as f64 / total,
        tail_stderr: 0.0,
    })
}

/// FNV-1a over the block assignment, used as the hypothesis symbol.
fn hypothesis_hash(assign: &[u32]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &a in assign {
        for byte in a.to_le_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

struct Trial {
    gap: i128,
    duplicate: bool,
    hash: u64,
    z0: u32,
    z_indep: u32,
}

fn verify_monte_carlo(cfg: &CexConfig, trials: usize, seed: u64) -> Result<PropertyReport> {
    cfg.warn_scope();
    let big_n = cfg.examples();
    let n = cfg.n;
    let fixed = fixed_partition(cfg);
    let results: Vec<Trial> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = Rng::with_stream(seed, t as u64);
            let s: Vec<u32> = (0..n).map(|_| rng.below(big_n) as u32).collect();
            let duplicate = duplicates(&s);
            let w = match cfg.algorithm {
                CexAlgorithm::Construction => sample_construction(cfg, &s, duplicate, &mut rng),
                CexAlgorithm::FixedPartition => fixed.clone(),
            };
            let assign = w.assignment();
            let par = w.block_parities();
            let losses = losses_of(&s, &assign, &par);
            if cfg.algorithm == CexAlgorithm::Construction {
                check_empirical_risk(&s, losses)?;
            }
            let odd = par.iter().map(|&b| b as u32).sum();
            Ok(Trial {
                gap: scaled_gap(big_n, n, odd, losses),
                duplicate,
                hash: hypothesis_hash(&assign),
                z0: s[0],
                z_indep: rng.below(big_n) as u32,
            })
        })
        .collect::<Result<_>>()?;
    let nn = (big_n * n) as f64;
    let m = trials as f64;
    let gaps: Vec<f64> = results.iter().map(|r| r.gap as f64 / nn).collect();
    let gap_mean = gaps.iter().sum::<f64>() / m;
    let gap_var = gaps.iter().map(|g| (g - gap_mean).powi(2)).sum::<f64>() / (m - 1.0);
    let tail = results.iter().filter(|r| 4 * r.gap >= (big_n * n) as i128).count() as f64 / m;
    let free = results.iter().filter(|r| !r.duplicate).count() as f64 / m;
    let duplicate_free_kl = match cfg.algorithm {
        CexAlgorithm::Construction => ln_support_ratio(big_n, n),
        CexAlgorithm::FixedPartition => 0.0,
    };
    let pairs: Vec<(u64, u32)> = results.iter().map(|r| (r.hash, r.z0)).collect();
    let baseline: Vec<(u64, u32)> = results.iter().map(|r| (r.hash, r.z_indep)).collect();
    Ok(PropertyReport {
        d: cfg.d,
        n,
        mode: cfg.mode,
        algorithm: cfg.algorithm,
        beyond_theorem_scope: cfg.beyond_theorem_scope(),
        trials,
        kl: KlCheck {
            duplicate_free_kl,
            analytic_lower: analytic_kl_lower(big_n, n),
            duplicate_free_probability: free,
            prob_kl_at_least_n_minus_1: if duplicate_free_kl >= (n - 1) as f64 { free } else { 0.0 },
        },
        mi_single: plugin_mi(&pairs).value,
        mi_single_exact: false,
        mi_single_baseline: Some(plugin_mi(&baseline).value),
        max_tv: None,
        marginal_uniform: None,
        gap_mean,
        gap_stderr: (gap_var / m).sqrt(),
        gap_sq_mean: gaps.iter().map(|g| g * g).sum::<f64>() / m,
        gap_tail: tail,
        tail_stderr: (tail * (1.0 - tail) / m).sqrt(),
    })
}

/// Exact check of `E gap² ≤ 1/n + (1/n²) Σ_{i≠k} √(2 I(W; Zᵢ, Z_k))`.
pub fn pairwise_bound_check(cfg: &CexConfig) -> Result<PairwiseReport> {
    let joint = ExactJoint::build(cfg)?;
    let (big_n, n) = (joint.big_n, joint.n);
    let (assign, parities, odd) = joint.hyp_tables();
    let mut sum_g2 = 0u128;
    for (s, h, w) in &joint.entries {
        let g = scaled_gap(big_n, n, odd[*h], losses_of(s, &assign[*h], &parities[*h]));
        sum_g2 += w * (g * g) as u128;
    }
    let nn = (big_n * n) as f64;
    let lhs = sum_g2 as f64 / (joint.total as f64 * nn * nn);
    let single_mi: Vec<f64> = (0..n).map(|i| joint.mi_with_positions(&[i])).collect();
    let mut pair_mi = Vec::new();
    for i in 0..n {
        for k in i + 1..n {
            pair_mi.push((i, k, joint.mi_with_positions(&[i, k])));
        }
    }
    let nf = n as f64;
    let rhs = 1.0 / nf + 2.0 * pair_mi.iter().map(|p| (2.0 * p.2).sqrt()).sum::<f64>() / (nf * nf);
    Ok(PairwiseReport { lhs, rhs, single_mi, pair_mi, holds: lhs <= rhs })
}
