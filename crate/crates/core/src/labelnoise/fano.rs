use serde::{Deserialize, Serialize};

use super::{NoiseError, Result};

pub const FANO_TOL: f64 = 1e-9;

/// Binary entropy in nats, with `0 log 0 = 0`.
pub fn binary_entropy(r: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.ln() };
    term(r) + term(1.0 - r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanoInputs {
    pub k: usize,
    /// `H(Y|X)` in nats.
    pub h_y_given_x: f64,
    /// `I(W; Y | X)/n` in nats.
    pub info_per_example: f64,
}

impl FanoInputs {
    /// Uniform label noise: `H(Y|X) = h(p) + p log(k − 1)`.
    pub fn uniform(k: usize, p: f64, info_per_example: f64) -> Result<Self> {
        if k < 2 {
            return Err(NoiseError::Invalid("k must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(NoiseError::Invalid(format!("noise level {p} outside [0, 1]")));
        }
        let extra = if k > 2 { p * ((k - 1) as f64).ln() } else { 0.0 };
        Ok(Self { k, h_y_given_x: binary_entropy(p) + extra, info_per_example })
    }

    fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(NoiseError::Invalid("k must be at least 2".into()));
        }
        if !(self.h_y_given_x >= 0.0) || !(self.info_per_example >= 0.0) {
            return Err(NoiseError::Invalid("entropy and information must be non-negative".into()));
        }
        Ok(())
    }
}

/// Smallest training error rate `r ∈ [0, (k−1)/k]` with
/// `r ≥ (H − I/n − h(r)) / log(k − 1)` (for `k = 2`: `h(r) ≥ H − I/n`),
/// found by bisection on the monotone residual.
pub fn fano_lower_bound(inputs: &FanoInputs, tol: f64) -> Result<f64> {
    inputs.validate()?;
    let c = inputs.h_y_given_x - inputs.info_per_example;
    if c <= 0.0 {
        return Ok(0.0);
    }
    let k = inputs.k as f64;
    let hi_end = (k - 1.0) / k;
    let residual = |r: f64| {
        if inputs.k == 2 {
            binary_entropy(r) - c
        } else {
            r + binary_entropy(r) / (k - 1.0).ln() - c / (k - 1.0).ln()
        }
    };
    if residual(hi_end) < 0.0 {
        return Ok(hi_end);
    }
    let (mut lo, mut hi) = (0.0, hi_end);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if residual(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `r₀` as a function of information per example under uniform noise.
pub fn fano_curve(k: usize, p: f64, infos: &[f64]) -> Result<Vec<(f64, f64)>> {
    infos
        .iter()
        .map(|&i| Ok((i, fano_lower_bound(&FanoInputs::uniform(k, p, i)?, FANO_TOL)?)))
        .collect()
}

/// Capacity of a `d`-dimensional Gaussian gradient channel with power `L²`
/// and noise variance `σ_q²` per coordinate: `(d/2) log(1 + L²/(dσ_q²))`.
pub fn gradient_capacity_bound(d: usize, l2: f64, sigma_q2: f64) -> Result<f64> {
    if d == 0 || !(sigma_q2 > 0.0) || !(l2 >= 0.0) {
        return Err(NoiseError::Invalid("need d ≥ 1, L² ≥ 0, σ_q² > 0".into()));
    }
    let d = d as f64;
    Ok(0.5 * d * (l2 / (d * sigma_q2)).ln_1p())
}
