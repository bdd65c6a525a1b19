use nalgebra::{Cholesky, DVector, Dyn};

use super::{InfoError, Result};
use crate::kernels::FisherMatrix;
use crate::numkit::{solve_lyapunov, SymMatrix};

/// Covariance `Σ` of the Gaussian smoothing applied to trained weights.
#[derive(Debug, Clone)]
pub enum Smoothing {
    /// `Σ = σ² I`.
    Isotropic { sigma2: f64 },
    /// `Σ⁻¹ = F / σ²`.
    Fisher { fisher: FisherMatrix, sigma: f64 },
    /// Explicit positive definite covariance.
    Covariance { factor: Cholesky<f64, Dyn> },
}

impl Smoothing {
    pub fn isotropic(sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(InfoError::Invalid("σ² must be positive".into()));
        }
        Ok(Smoothing::Isotropic { sigma2 })
    }

    pub fn covariance(sigma: &SymMatrix) -> Result<Self> {
        let factor = sigma.as_matrix().clone().cholesky().ok_or(InfoError::SingularSmoothing)?;
        let diag = factor.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), v| (a.min(v.abs()), b.max(v.abs())));
        if !(lo > 1e-8 * hi) {
            return Err(InfoError::SingularSmoothing);
        }
        Ok(Smoothing::Covariance { factor })
    }

    /// Steady-state covariance of SGD near a minimum with Hessian `H` and
    /// per-sample gradient covariance `Λ`: `HΣ + ΣH = (η/b)Λ`.
    pub fn sgd_steady(hessian: &SymMatrix, noise_cov: &SymMatrix, learning_rate: f64, batch_size: usize) -> Result<Self> {
        if !(learning_rate > 0.0) || batch_size == 0 {
            return Err(InfoError::Invalid("η and b must be positive".into()));
        }
        let rhs = noise_cov.scale(learning_rate / batch_size as f64);
        let sigma = solve_lyapunov(hessian, &rhs)?;
        Self::covariance(&sigma)
    }
}

/// `½ δᵀ Σ⁻¹ δ` in nats.
pub fn usi(delta: &DVector<f64>, smoothing: &Smoothing) -> Result<f64> {
    let value = match smoothing {
        Smoothing::Isotropic { sigma2 } => 0.5 * delta.norm_squared() / sigma2,
        Smoothing::Fisher { fisher, sigma } => {
            if fisher.dim() != delta.len() {
                return Err(InfoError::Invalid(format!("delta has length {}, Fisher is {}", delta.len(), fisher.dim())));
            }
            0.5 * fisher.quad_form(delta) / (sigma * sigma)
        }
        Smoothing::Covariance { factor } => {
            if factor.l_dirty().nrows() != delta.len() {
                return Err(InfoError::Invalid("delta length does not match Σ".into()));
            }
            0.5 * delta.dot(&factor.solve(delta))
        }
    };
    Ok(value.max(0.0))
}

/// Isotropic USI from dual coefficients: `‖Jᵀδa‖² = δaᵀ Θ δa`.
pub fn usi_isotropic_from_kernel(kernel: &SymMatrix, coeff_delta: &DVector<f64>, sigma2: f64) -> f64 {
    (0.5 * kernel.quad_form(coeff_delta) / sigma2).max(0.0)
}

/// Langevin special case (`Λ = σ²I`): `(b/(ησ²)) δᵀ H δ`.
pub fn langevin_usi(delta: &DVector<f64>, hessian: &SymMatrix, learning_rate: f64, batch_size: usize, sigma2: f64) -> f64 {
    batch_size as f64 / (learning_rate * sigma2) * hessian.quad_form(delta)
}
