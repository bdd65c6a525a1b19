use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{KernelError, NtkMatrix, Result};
use crate::numkit::EigenDecomp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynMode {
    Continuous,
    Discrete,
}

/// Gradient descent on `½Σ‖f − y‖² + (λ/2)‖w − w₀‖²` of the linearized model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinDynConfig {
    pub learning_rate: f64,
    /// Training time; `f64::INFINITY` (`null` in JSON) gives the stationary
    /// solution.
    #[serde(with = "time_or_null")]
    pub time: f64,
    pub mode: DynMode,
    #[serde(default)]
    pub weight_decay: f64,
}

mod time_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &f64, s: S) -> Result<S::Ok, S::Error> {
        if t.is_infinite() { s.serialize_none() } else { s.serialize_f64(*t) }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl LinDynConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(KernelError::InvalidConfig("learning_rate must be positive".into()));
        }
        if !(self.time >= 0.0) {
            return Err(KernelError::InvalidConfig("time must be non-negative".into()));
        }
        if self.mode == DynMode::Discrete && self.time.is_finite() && self.time.fract() != 0.0 {
            return Err(KernelError::InvalidConfig("discrete time must be an integer step count".into()));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(KernelError::InvalidConfig("weight_decay must be non-negative".into()));
        }
        Ok(())
    }
}

/// Spectral gain `g(μ)` with `a_t = Q g(M) Qᵀ (y − f₀)` for `A = Θ₀ + λI = Q M Qᵀ`.
///
/// Continuous: `(1 − e^{−ημt})/μ`; discrete: `(1 − (1 − ημ)^t)/μ`; both tend
/// to `ηt` as `μ → 0` and to `1/μ` as `t → ∞`.
pub fn coefficient_gain(mu: f64, cfg: &LinDynConfig, null_tol: f64) -> f64 {
    let eta = cfg.learning_rate;
    let t = cfg.time;
    if t == 0.0 {
        return 0.0;
    }
    if t.is_infinite() {
        return if mu > null_tol { 1.0 / mu } else { 0.0 };
    }
    if mu == 0.0 {
        return eta * t;
    }
    match cfg.mode {
        DynMode::Continuous => -(-eta * mu * t).exp_m1() / mu,
        DynMode::Discrete => {
            let base = 1.0 - eta * mu;
            if base > 0.0 {
                -(t * (-eta * mu).ln_1p()).exp_m1() / mu
            } else {
                (1.0 - base.powf(t)) / mu
            }
        }
    }
}

/// Dual coefficients from an eigendecomposition of `Θ₀` (not yet regularized).
pub fn solve_coefficients(eig: &EigenDecomp, residual: &DVector<f64>, cfg: &LinDynConfig) -> Result<DVector<f64>> {
    cfg.validate()?;
    if residual.len() != eig.dim() {
        return Err(KernelError::Shape { what: "residual", expected: eig.dim(), got: residual.len() });
    }
    let lambda = cfg.weight_decay;
    let top = eig.max_value().max(0.0) + lambda;
    let null_tol = 1e-10 * top.max(f64::MIN_POSITIVE);
    if cfg.mode == DynMode::Discrete && cfg.learning_rate * top >= 2.0 {
        warn!(
            "discrete dynamics unstable: η(λ_max + λ) = {:.3e} ≥ 2",
            cfg.learning_rate * top
        );
    }
    if cfg.time.is_infinite() && eig.values.iter().any(|&v| v + lambda <= null_tol) {
        warn!("Θ₀ + λI is singular; using the pseudo-inverse on its range");
    }
    Ok(eig.apply_fn_vec(|v| coefficient_gain(v + lambda, cfg, null_tol), residual))
}

/// Closed-form linearized training outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSolution {
    /// `a_t`: the weight change is `ω_t = Jᵀ a_t`.
    pub coefficients: DVector<f64>,
    pub initial_predictions: DVector<f64>,
    pub train_predictions: DVector<f64>,
}

impl LinearizedSolution {
    /// `f₀(x′) + Θ₀(x′, x) a_t`.
    pub fn predict(&self, cross: &DMatrix<f64>, f0_probe: &DVector<f64>) -> Result<DVector<f64>> {
        if cross.ncols() != self.coefficients.len() {
            return Err(KernelError::Shape { what: "cross kernel columns", expected: self.coefficients.len(), got: cross.ncols() });
        }
        if cross.nrows() != f0_probe.len() {
            return Err(KernelError::Shape { what: "probe predictions", expected: cross.nrows(), got: f0_probe.len() });
        }
        Ok(f0_probe + cross * &self.coefficients)
    }

    /// `ω_t = Jᵀ a_t` for stacked Jacobians `J` (`nk × d`).
    pub fn weight_update(&self, features: &DMatrix<f64>) -> DVector<f64> {
        features.tr_mul(&self.coefficients)
    }
}

/// Linearized predictions after training time `t` from initial outputs `f₀`
/// and flattened targets `y` (both length `nk`).
pub fn linearized_solution(
    ntk: &NtkMatrix,
    f0: &DVector<f64>,
    y: &DVector<f64>,
    cfg: &LinDynConfig,
) -> Result<LinearizedSolution> {
    if f0.len() != ntk.dim() || y.len() != ntk.dim() {
        return Err(KernelError::Shape { what: "targets", expected: ntk.dim(), got: f0.len().min(y.len()) });
    }
    let eig = ntk.eigen()?;
    let coefficients = solve_coefficients(eig, &(y - f0), cfg)?;
    let train_predictions = f0 + ntk.matrix().mul_vec(&coefficients);
    Ok(LinearizedSolution { coefficients, initial_predictions: f0.clone(), train_predictions })
}
