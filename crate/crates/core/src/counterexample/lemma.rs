use serde::{Deserialize, Serialize};

use super::{CexError, Result};

/// Upper limit on ordered block pairs for [`lemma_cov_exhaustive`].
pub const LEMMA_ENUMERATION_CAP: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovReport {
    pub n0: usize,
    pub n1: usize,
    pub n: usize,
    /// `P(Y₁ = 1)`.
    pub e_y1: f64,
    /// `P(Y₁ = 1, Y₂ = 1)`.
    pub joint: f64,
    /// `P(Y₁ = 1)²`.
    pub product: f64,
    pub cov: f64,
    /// `cov / E[Y₁]²`; `None` when `E[Y₁] = 0`.
    pub ratio: Option<f64>,
}

fn ln_choose(a: i64, b: i64) -> Option<f64> {
    if b < 0 || a < 0 || b > a {
        return None;
    }
    let b = b.min(a - b);
    Some((1..=b).map(|i| ((a - b + i) as f64 / i as f64).ln()).sum())
}

fn validate(n0: usize, n1: usize, n: usize) -> Result<()> {
    let total = n0 + n1;
    if n == 0 || total % n != 0 || total < 2 * n {
        return Err(CexError::Invalid(format!("{total} bits cannot form two or more blocks of size {n}")));
    }
    Ok(())
}

/// Closed-form parity covariance of the first two blocks of a uniformly random
/// ordered partition of `n0` zeros and `n1` ones into blocks of size `n`.
/// Every term is evaluated in log space.
pub fn lemma_cov_check(n0: usize, n1: usize, n: usize) -> Result<CovReport> {
    validate(n0, n1, n)?;
    let (a0, a1, nn) = (n0 as i64, n1 as i64, n as i64);
    let total = a0 + a1;
    let ln_m = ln_choose(total, nn).unwrap() + ln_choose(total - nn, nn).unwrap();
    let ln_single = ln_choose(total, nn).unwrap();
    let term = |parts: &[Option<f64>], ln_norm: f64| -> f64 {
        parts.iter().try_fold(0.0, |acc, p| p.map(|v| acc + v)).map_or(0.0, |s| (s - ln_norm).exp())
    };
    let (mut odd, mut even) = (0.0, 0.0);
    for ones in 0..=nn {
        let p = term(&[ln_choose(a1, ones), ln_choose(a0, nn - ones)], ln_single);
        if ones % 2 == 1 {
            odd += p;
        } else {
            even += p;
        }
    }
    if (odd + even - 1.0).abs() > 1e-10 {
        return Err(CexError::Invariant(format!("block parity distribution sums to {}", odd + even)));
    }
    let mut joint = 0.0;
    for u in 0..=(nn - 1) / 2 {
        for v in 0..=(nn - 1) / 2 {
            let (o1, o2) = (2 * u + 1, 2 * v + 1);
            joint += term(
                &[
                    ln_choose(a1, o1),
                    ln_choose(a0, nn - o1),
                    ln_choose(a1 - o1, o2),
                    ln_choose(a0 - nn + o1, nn - o2),
                ],
                ln_m,
            );
        }
    }
    if !(-1e-12..=1.0 + 1e-12).contains(&joint) {
        return Err(CexError::Invariant(format!("joint probability {joint} outside [0, 1]")));
    }
    let product = odd * odd;
    let cov = joint - product;
    let ratio = (odd > 0.0).then(|| cov / product);
    Ok(CovReport { n0, n1, n, e_y1: odd, joint, product, cov, ratio })
}

/// Enumerates every ordered pair of disjoint blocks; returns
/// `(P(Y₁ = 1, Y₂ = 1), P(Y₁ = 1))`.
pub fn lemma_cov_exhaustive(n0: usize, n1: usize, n: usize) -> Result<(f64, f64)> {
    validate(n0, n1, n)?;
    let total = n0 + n1;
    if total > 64 {
        return Err(CexError::Invalid("exhaustive enumeration supports at most 64 bits".into()));
    }
    let pairs = (ln_choose(total as i64, n as i64).unwrap() + ln_choose((total - n) as i64, n as i64).unwrap()).exp();
    if pairs > LEMMA_ENUMERATION_CAP {
        return Err(CexError::TooLarge { what: "ordered block pairs", size: pairs, cap: LEMMA_ENUMERATION_CAP });
    }
    // Bits 0..n1 are ones.
    let bit = |i: usize| (i < n1) as u32;
    let mut subsets: Vec<u64> = Vec::new();
    collect_subsets(total, n, 0, 0, 0, &mut subsets);
    let (mut both, mut count, mut first_odd) = (0u64, 0u64, 0u64);
    let odd = |mask: u64| (0..total).filter(|&i| mask >> i & 1 == 1).map(bit).sum::<u32>() % 2 == 1;
    let parity: Vec<bool> = subsets.iter().map(|&m| odd(m)).collect();
    for (i, &a) in subsets.iter().enumerate() {
        if parity[i] {
            first_odd += 1;
        }
        for (j, &b) in subsets.iter().enumerate() {
            if a & b != 0 {
                continue;
            }
            count += 1;
            if parity[i] && parity[j] {
                both += 1;
            }
        }
    }
    Ok((both as f64 / count as f64, first_odd as f64 / subsets.len() as f64))
}

fn collect_subsets(total: usize, k: usize, start: usize, depth: usize, mask: u64, out: &mut Vec<u64>) {
    if depth == k {
        out.push(mask);
        return;
    }
    for i in start..total {
        collect_subsets(total, k, i + 1, depth + 1, mask | 1 << i, out);
    }
}
