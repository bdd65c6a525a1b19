use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{shape_err, NetError, Result};

/// Batch-mean training losses. For the distillation losses the targets are
/// teacher logits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Loss {
    /// `(1/2n) Σ ‖f − y‖²`
    Mse,
    /// `−(1/n) Σ yᵀ log softmax(f)`
    SoftmaxCe,
    /// `−(τ²/n) Σ softmax(g/τ)ᵀ log softmax(f/τ)`
    KdCe { tau: f64 },
    /// `(τ/2n) Σ ‖softmax(g/τ) − f‖²`
    KdMse { tau: f64 },
}

impl Loss {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Loss::KdCe { tau } | Loss::KdMse { tau } if !(tau > 0.0 && tau.is_finite()) => {
                Err(NetError::InvalidConfig(format!("temperature must be positive, got {tau}")))
            }
            _ => Ok(()),
        }
    }
}

/// Row-wise `softmax(m / τ)`.
pub fn softmax_rows(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let mut out = m / tau;
    for mut row in out.row_iter_mut() {
        let mx = row.max();
        row.apply(|v| *v = (*v - mx).exp());
        let s = row.sum();
        row /= s;
    }
    out
}

/// Row-wise `log softmax(m / τ)`.
pub fn log_softmax_rows(m: &DMatrix<f64>, tau: f64) -> DMatrix<f64> {
    let mut out = m / tau;
    for mut row in out.row_iter_mut() {
        let mx = row.max();
        let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
        row.apply(|v| *v -= lse);
    }
    out
}

/// Loss value and its gradient with respect to the logits.
pub fn loss_and_grad(loss: Loss, logits: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    loss.validate()?;
    if logits.shape() != targets.shape() {
        return Err(shape_err("loss targets", format!("{:?}", logits.shape()), format!("{:?}", targets.shape())));
    }
    let n = logits.nrows().max(1) as f64;
    Ok(match loss {
        Loss::Mse => {
            let diff = logits - targets;
            (0.5 * diff.norm_squared() / n, diff / n)
        }
        Loss::SoftmaxCe => {
            let logp = log_softmax_rows(logits, 1.0);
            let p = logp.map(f64::exp);
            let value = -targets.component_mul(&logp).sum() / n;
            let mut grad = p;
            for (mut g, y) in grad.row_iter_mut().zip(targets.row_iter()) {
                let mass = y.sum();
                g *= mass;
                g -= y;
            }
            (value, grad / n)
        }
        Loss::KdCe { tau } => {
            let p_teacher = softmax_rows(targets, tau);
            let logq = log_softmax_rows(logits, tau);
            let value = -tau * tau * p_teacher.component_mul(&logq).sum() / n;
            let grad = (logq.map(f64::exp) - p_teacher) * (tau / n);
            (value, grad)
        }
        Loss::KdMse { tau } => {
            let p_teacher = softmax_rows(targets, tau);
            let diff = logits - p_teacher;
            (0.5 * tau * diff.norm_squared() / n, diff * (tau / n))
        }
    })
}
