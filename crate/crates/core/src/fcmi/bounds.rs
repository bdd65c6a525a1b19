use log::warn;
use serde::{Deserialize, Serialize};

use super::{plugin_mi, FcmiError, PredictionTable, ProtocolOutcome, Result};
use crate::stats::{mean, std_dev};

/// A per-supersample quantity with its mean and standard deviation over
/// supersamples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub mean: f64,
    pub sd: f64,
    pub per_supersample: Vec<f64>,
}

impl BoundReport {
    fn from_values(per_supersample: Vec<f64>) -> Self {
        Self { mean: mean(&per_supersample), sd: std_dev(&per_supersample), per_supersample }
    }

    /// The bound capped at 1, the largest possible 0-1 gap.
    pub fn clipped(&self) -> f64 {
        self.mean.min(1.0)
    }
}

fn check_checkpoint(table: &PredictionTable, c: usize) -> Result<()> {
    if c >= table.checkpoints.len() {
        return Err(FcmiError::Invalid(format!("checkpoint index {c} out of range")));
    }
    if table.k2 < 10 {
        warn!("k2 = {} is small; the plug-in MI estimate is strongly biased", table.k2);
    }
    Ok(())
}

fn pair_mi(table: &PredictionTable, u: usize, c: usize, i: usize) -> f64 {
    let samples: Vec<((u32, u32), bool)> =
        table.valid_runs(u).map(|r| (table.pair(u, r, c, i), table.mask(u, r)[i])).collect();
    plugin_mi(&samples).value
}

/// `(1/n) Σᵢ √(2 I(F̃ᵢ; Jᵢ))` per supersample, averaged over supersamples.
pub fn fcmi_bound_m1(table: &PredictionTable, c: usize) -> Result<BoundReport> {
    check_checkpoint(table, c)?;
    let per = (0..table.k1)
        .map(|u| (0..table.n).map(|i| (2.0 * pair_mi(table, u, c, i)).sqrt()).sum::<f64>() / table.n as f64)
        .collect();
    Ok(BoundReport::from_values(per))
}

/// `√(2 I(F̃; J)/n)` with the whole prediction vector; the plug-in estimate
/// saturates at `log k2` once predictions rarely repeat.
pub fn fcmi_bound_mn(table: &PredictionTable, c: usize) -> Result<BoundReport> {
    check_checkpoint(table, c)?;
    let per = (0..table.k1)
        .map(|u| {
            let samples: Vec<(Vec<u32>, Vec<bool>)> = table
                .valid_runs(u)
                .map(|r| (table.run_predictions(u, r, c).to_vec(), table.mask(u, r).to_vec()))
                .collect();
            (2.0 * plugin_mi(&samples).value / table.n as f64).sqrt()
        })
        .collect();
    Ok(BoundReport::from_values(per))
}

/// Views that drop one member of each pair. Not bounds: they can miss
/// information that the full pair reveals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticView {
    /// Prediction on the training member only.
    TrainOnly,
    /// Prediction on the held-out member only.
    TestOnly,
}

/// `(1/n) Σᵢ √(2 I(view; Jᵢ))` for a one-sided view (diagnostic, not a bound).
pub fn diagnostic_mi(table: &PredictionTable, c: usize, view: DiagnosticView) -> Result<BoundReport> {
    check_checkpoint(table, c)?;
    let per = (0..table.k1)
        .map(|u| {
            (0..table.n)
                .map(|i| {
                    let samples: Vec<(u32, bool)> = table
                        .valid_runs(u)
                        .map(|r| {
                            let b = table.mask(u, r)[i];
                            let (p0, p1) = table.pair(u, r, c, i);
                            let train_side = if b { p1 } else { p0 };
                            let test_side = if b { p0 } else { p1 };
                            (if view == DiagnosticView::TrainOnly { train_side } else { test_side }, b)
                        })
                        .collect();
                    (2.0 * plugin_mi(&samples).value).sqrt()
                })
                .sum::<f64>()
                / table.n as f64
        })
        .collect();
    Ok(BoundReport::from_values(per))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub mean: f64,
    /// Standard deviation of `ĝ(z̃)` over supersamples.
    pub sd: f64,
    pub stderr: f64,
}

/// Standard error of the grand mean: between-supersample variance over `k1`
/// plus the mean within-supersample variance over `k1·k2`.
pub fn combined_stderr(per_run: &[Vec<f64>]) -> f64 {
    let k1 = per_run.len() as f64;
    let means: Vec<f64> = per_run.iter().map(|v| mean(v)).collect();
    let between = if per_run.len() > 1 { std_dev(&means).powi(2) } else { 0.0 };
    let within = per_run
        .iter()
        .map(|v| if v.len() > 1 { std_dev(v).powi(2) / v.len() as f64 } else { 0.0 })
        .sum::<f64>()
        / k1;
    (between / k1 + within / k1).sqrt()
}

pub fn gap_summary(outcome: &ProtocolOutcome, c: usize) -> GapSummary {
    let gaps = outcome.gaps(c);
    let per_run: Vec<Vec<f64>> = (0..outcome.table.k1).map(|u| outcome.per_run_gaps(u, c)).collect();
    GapSummary { mean: mean(&gaps), sd: std_dev(&gaps), stderr: combined_stderr(&per_run) }
}

/// `√(2σ² I(W; S)/n)`.
pub fn xu_raginsky(sigma: f64, n: usize, info: f64) -> f64 {
    (2.0 * sigma * sigma * info / n as f64).sqrt()
}

/// `(4σ²/n)(I(W; S) + log 3)`, a bound on the expected squared gap.
pub fn xu_raginsky_squared(sigma: f64, n: usize, info: f64) -> f64 {
    4.0 * sigma * sigma / n as f64 * (info + 3f64.ln())
}

/// `(1/n) Σᵢ √(2σ² I(W; Zᵢ))`.
pub fn samplewise(sigma: f64, infos: &[f64]) -> f64 {
    infos.iter().map(|i| (2.0 * sigma * sigma * i).sqrt()).sum::<f64>() / infos.len().max(1) as f64
}

/// `E_U √((2/m) I(W; J_U))` from the values of `I(W; J_U)` over the subsets
/// `U` of size `m` that were evaluated (averaged uniformly).
pub fn cmi_m(m: usize, subset_infos: &[f64]) -> f64 {
    subset_infos.iter().map(|i| (2.0 * i / m as f64).sqrt()).sum::<f64>() / subset_infos.len().max(1) as f64
}

/// `(8/n)(I + 2)`, the squared-gap form for conditional (weight or
/// functional) information with the full selector.
pub fn cmi_squared(n: usize, info: f64) -> f64 {
    8.0 / n as f64 * (info + 2.0)
}

/// `max{(d+1) log 2, d log(2en/d)}` nats.
pub fn vc_fcmi_cap(d: usize, n: usize) -> f64 {
    let d = d as f64;
    let a = (d + 1.0) * std::f64::consts::LN_2;
    if d == 0.0 {
        return a;
    }
    a.max(d * (2.0 * std::f64::consts::E * n as f64 / d).ln())
}

/// `2^{3/2} d^{1/4} √(γβ)` for a `β` self-stable method with `d` outputs and
/// a `γ`-Lipschitz loss.
pub fn stability_bound(d: usize, gamma: f64, beta: f64) -> f64 {
    2f64.powf(1.5) * (d as f64).powf(0.25) * (gamma * beta).sqrt()
}

/// `32/n + 12^{3/2} √d γ √(2β² + nβ₁² + nβ₂²)`.
pub fn stability_squared_bound(n: usize, d: usize, gamma: f64, beta: f64, beta1: f64, beta2: f64) -> f64 {
    let nf = n as f64;
    32.0 / nf + 12f64.powf(1.5) * (d as f64).sqrt() * gamma * (2.0 * beta * beta + nf * beta1 * beta1 + nf * beta2 * beta2).sqrt()
}

/// `1/n + (1/n²) Σ_{i≠k} √(2 I(W; Zᵢ, Zₖ))` over the supplied ordered pairs.
pub fn pairwise_squared(n: usize, pair_infos: &[f64]) -> f64 {
    let nf = n as f64;
    1.0 / nf + pair_infos.iter().map(|i| (2.0 * i).sqrt()).sum::<f64>() / (nf * nf)
}
