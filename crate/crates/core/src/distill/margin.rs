use serde::{Deserialize, Serialize};

use super::{DistillError, Result};

/// Ramp loss: 1 for `α ≤ 0`, `1 − α/γ` on `(0, γ]`, 0 beyond.
pub fn margin_loss(alpha: f64, gamma: f64) -> f64 {
    if alpha <= 0.0 {
        1.0
    } else if alpha <= gamma {
        1.0 - alpha / gamma
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginInputs {
    /// `sign(Yᵢ) f(Xᵢ)` on the training set.
    pub margins: Vec<f64>,
    pub gamma: f64,
    /// `Yᵀ K⁻¹ Y`.
    pub complexity: f64,
    pub trace: f64,
    pub delta: f64,
    /// Upper bound on `k(x, x)`.
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginBound {
    pub gamma: f64,
    pub empirical_margin_loss: f64,
    pub complexity_term: f64,
    pub confidence_term: f64,
    pub m0: f64,
    pub teacher_risk: Option<f64>,
    pub total: f64,
}

fn validate(x: &MarginInputs) -> Result<()> {
    if x.margins.is_empty() {
        return Err(DistillError::Invalid("no margins".into()));
    }
    if !(x.gamma > 0.0) || !(x.kappa > 0.0) || !(x.delta > 0.0 && x.delta < 1.0) {
        return Err(DistillError::Invalid("need γ > 0, κ > 0 and δ in (0, 1)".into()));
    }
    if !(x.complexity >= 0.0) || !(x.trace >= 0.0) {
        return Err(DistillError::Invalid("complexity and trace must be non-negative".into()));
    }
    Ok(())
}

/// Empirical margin loss `+ (2√(YᵀK⁻¹Y) + 2)√(tr K)/(γn) + 3√(ln(2M₀/δ)/(2n))`
/// with `M₀ = ⌈γ√n / (2√κ)⌉`.
pub fn margin_bound_rhs(x: &MarginInputs) -> Result<MarginBound> {
    validate(x)?;
    let n = x.margins.len() as f64;
    let empirical = x.margins.iter().map(|&a| margin_loss(a, x.gamma)).sum::<f64>() / n;
    let complexity_term = (2.0 * x.complexity.sqrt() + 2.0) * x.trace.sqrt() / (x.gamma * n);
    let m0 = (x.gamma * n.sqrt() / (2.0 * x.kappa.sqrt())).ceil();
    let confidence_term = 3.0 * ((2.0 * m0 / x.delta).ln() / (2.0 * n)).sqrt();
    Ok(MarginBound {
        gamma: x.gamma,
        empirical_margin_loss: empirical,
        complexity_term,
        confidence_term,
        m0,
        teacher_risk: None,
        total: empirical + complexity_term + confidence_term,
    })
}

/// Student risk bound against true labels: teacher risk plus the margin bound
/// evaluated on teacher targets.
pub fn distillation_bound_rhs(x: &MarginInputs, teacher_risk: f64) -> Result<MarginBound> {
    if !(0.0..=1.0).contains(&teacher_risk) {
        return Err(DistillError::Invalid(format!("teacher risk {teacher_risk} outside [0, 1]")));
    }
    let mut b = margin_bound_rhs(x)?;
    b.teacher_risk = Some(teacher_risk);
    b.total += teacher_risk;
    Ok(b)
}

/// Bound at every `γ` of a grid and the index of the smallest. The minimum
/// over a grid is a sweep, not a bound that holds for the selected `γ`.
pub fn gamma_sweep(x: &MarginInputs, gammas: &[f64]) -> Result<(usize, Vec<MarginBound>)> {
    if gammas.is_empty() {
        return Err(DistillError::Invalid("empty γ grid".into()));
    }
    let all: Vec<MarginBound> = gammas
        .iter()
        .map(|&gamma| margin_bound_rhs(&MarginInputs { gamma, ..x.clone() }))
        .collect::<Result<_>>()?;
    let best = (0..all.len()).min_by(|&a, &b| all[a].total.total_cmp(&all[b].total)).unwrap();
    Ok((best, all))
}
