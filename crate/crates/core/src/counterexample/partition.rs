use serde::{Deserialize, Serialize};

use super::{CexAlgorithm, CexConfig, CexError, CexMode, Result};
use crate::numkit::Rng;

/// Parity of the bits of example `z`.
pub fn parity(z: u32) -> u8 {
    (z.count_ones() & 1) as u8
}

/// `ln(N! / ((n!)^{N/n} (N/n)!))`.
pub fn ln_partition_count(big_n: usize, n: usize) -> f64 {
    let ln_fact = |m: usize| (2..=m).map(|i| (i as f64).ln()).sum::<f64>();
    let blocks = big_n / n;
    ln_fact(big_n) - blocks as f64 * ln_fact(n) - ln_fact(blocks)
}

/// Blocks are sorted internally and ordered by their minimum element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PartitionHypothesis {
    pub blocks: Vec<Vec<u32>>,
}

impl PartitionHypothesis {
    pub fn canonical(mut blocks: Vec<Vec<u32>>) -> Self {
        for b in &mut blocks {
            b.sort_unstable();
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        Self { blocks }
    }

    pub fn block_size(&self) -> usize {
        self.blocks[0].len()
    }

    pub fn examples(&self) -> usize {
        self.blocks.len() * self.block_size()
    }

    /// Block index of every example.
    pub fn assignment(&self) -> Vec<u32> {
        let mut out = vec![0; self.examples()];
        for (b, block) in self.blocks.iter().enumerate() {
            for &z in block {
                out[z as usize] = b as u32;
            }
        }
        out
    }

    pub fn block_parities(&self) -> Vec<u8> {
        self.blocks.iter().map(|b| b.iter().fold(0, |acc, &z| acc ^ parity(z))).collect()
    }

    pub fn contains_block(&self, block: &[u32]) -> bool {
        self.blocks.iter().any(|b| b.as_slice() == block)
    }

    pub fn validate(&self, big_n: usize, n: usize) -> Result<()> {
        let mut seen = vec![false; big_n];
        for b in &self.blocks {
            if b.len() != n {
                return Err(CexError::Invariant(format!("block of size {} (expected {n})", b.len())));
            }
            for &z in b {
                if z as usize >= big_n || std::mem::replace(&mut seen[z as usize], true) {
                    return Err(CexError::Invariant(format!("example {z} repeated or out of range")));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(CexError::Invariant("blocks do not cover every example".into()));
        }
        Ok(())
    }
}

/// Every partition of `elems` into blocks of size `n`, in canonical order.
pub fn partitions_of(elems: &[u32], n: usize) -> Vec<Vec<Vec<u32>>> {
    if elems.is_empty() {
        return vec![Vec::new()];
    }
    let first = elems[0];
    let rest = &elems[1..];
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(n - 1);
    choose(rest, n - 1, 0, &mut pick, &mut |chosen| {
        let remaining: Vec<u32> = rest.iter().copied().filter(|z| !chosen.contains(z)).collect();
        for mut tail in partitions_of(&remaining, n) {
            let mut block = vec![first];
            block.extend_from_slice(chosen);
            tail.insert(0, block);
            out.push(tail);
        }
    });
    out
}

fn choose(pool: &[u32], k: usize, start: usize, pick: &mut Vec<u32>, f: &mut dyn FnMut(&[u32])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..pool.len() {
        if pool.len() - i < k - pick.len() {
            break;
        }
        pick.push(pool[i]);
        choose(pool, k, i + 1, pick, f);
        pick.pop();
    }
}

pub fn all_partitions(cfg: &CexConfig) -> Result<Vec<PartitionHypothesis>> {
    cfg.validate()?;
    if cfg.mode != CexMode::Exhaustive {
        return Err(CexError::Invalid("partition enumeration requires exhaustive mode".into()));
    }
    let elems: Vec<u32> = (0..cfg.examples() as u32).collect();
    Ok(partitions_of(&elems, cfg.n).into_iter().map(|blocks| PartitionHypothesis { blocks }).collect())
}

/// Partitions that contain the (duplicate-free) block `s`.
pub fn partitions_containing(cfg: &CexConfig, s: &[u32]) -> Result<Vec<PartitionHypothesis>> {
    let mut block = s.to_vec();
    block.sort_unstable();
    let rest: Vec<u32> = (0..cfg.examples() as u32).filter(|z| block.binary_search(z).is_err()).collect();
    Ok(partitions_of(&rest, cfg.n)
        .into_iter()
        .map(|mut blocks| {
            blocks.push(block.clone());
            PartitionHypothesis::canonical(blocks)
        })
        .collect())
}

/// Uniformly random partition of `elems` into blocks of size `n`.
pub fn random_partition(elems: &[u32], n: usize, rng: &mut Rng) -> Vec<Vec<u32>> {
    let mut order = elems.to_vec();
    rng.shuffle(&mut order);
    order.chunks(n).map(|c| c.to_vec()).collect()
}

fn has_duplicates(s: &[u32]) -> bool {
    let mut v = s.to_vec();
    v.sort_unstable();
    v.windows(2).any(|w| w[0] == w[1])
}

pub(crate) fn fixed_partition(cfg: &CexConfig) -> PartitionHypothesis {
    let elems: Vec<u32> = (0..cfg.examples() as u32).collect();
    PartitionHypothesis { blocks: elems.chunks(cfg.n).map(|c| c.to_vec()).collect() }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlgorithmOutput {
    /// Uniform distribution over the listed hypotheses.
    Uniform(Vec<PartitionHypothesis>),
    Sample(PartitionHypothesis),
}

/// Exhaustive mode returns the output distribution, Monte-Carlo mode one draw.
pub fn run_algorithm(cfg: &CexConfig, s: &[u32], rng: &mut Rng) -> Result<AlgorithmOutput> {
    cfg.validate()?;
    let big_n = cfg.examples();
    if s.len() != cfg.n || s.iter().any(|&z| z as usize >= big_n) {
        return Err(CexError::Invalid(format!("training set must hold {} examples below {big_n}", cfg.n)));
    }
    let dup = has_duplicates(s);
    match (cfg.mode, cfg.algorithm) {
        (CexMode::Exhaustive, CexAlgorithm::FixedPartition) => Ok(AlgorithmOutput::Uniform(vec![fixed_partition(cfg)])),
        (CexMode::MonteCarlo { .. }, CexAlgorithm::FixedPartition) => Ok(AlgorithmOutput::Sample(fixed_partition(cfg))),
        (CexMode::Exhaustive, CexAlgorithm::Construction) => Ok(AlgorithmOutput::Uniform(if dup {
            all_partitions(cfg)?
        } else {
            partitions_containing(cfg, s)?
        })),
        (CexMode::MonteCarlo { .. }, CexAlgorithm::Construction) => Ok(AlgorithmOutput::Sample(sample_construction(cfg, s, dup, rng))),
    }
}

pub(crate) fn sample_construction(cfg: &CexConfig, s: &[u32], dup: bool, rng: &mut Rng) -> PartitionHypothesis {
    let big_n = cfg.examples() as u32;
    if dup {
        let elems: Vec<u32> = (0..big_n).collect();
        return PartitionHypothesis::canonical(random_partition(&elems, cfg.n, rng));
    }
    let mut block = s.to_vec();
    block.sort_unstable();
    let rest: Vec<u32> = (0..big_n).filter(|z| block.binary_search(z).is_err()).collect();
    let mut blocks = random_partition(&rest, cfg.n, rng);
    blocks.push(block);
    PartitionHypothesis::canonical(blocks)
}

pub(crate) fn duplicates(s: &[u32]) -> bool {
    has_duplicates(s)
}
