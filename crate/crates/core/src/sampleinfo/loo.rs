use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{InfoError, Result};
use crate::kernels::{
    build_ntk, cross_ntk, solve_coefficients, JacobianSketch, LinDynConfig, NtkMatrix,
    DEFAULT_NTK_CAP,
};
use crate::netkit::{flatten_rows, forward, Dataset, FlatWeights, MlpSpec};
use crate::numkit::{eigh, inverse_after_removal, SymMatrix};

/// Difference of linearized dual coefficients with and without example `i`;
/// the removed rows of the leave-one-out solution are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LooDelta {
    pub index: usize,
    pub coefficients: DVector<f64>,
}

impl LooDelta {
    /// `w − w₋ᵢ = Jᵀ(a − ã₋ᵢ)` for stacked Jacobians `J` (`nk × d`).
    pub fn weight_delta(&self, features: &DMatrix<f64>) -> DVector<f64> {
        features.tr_mul(&self.coefficients)
    }

    /// `f_w(x′) − f_{w₋ᵢ}(x′) = Θ₀(x′, x)(a − ã₋ᵢ)` (flattened, length `mk`).
    pub fn prediction_delta(&self, cross: &DMatrix<f64>) -> DVector<f64> {
        cross * &self.coefficients
    }
}

/// Leave-one-out coefficient differences for every training example.
///
/// At `t = ∞` the reduced inverse comes from a block inverse update; at
/// finite `t` the reduced kernel is re-diagonalized.
pub fn loo_weight_deltas(
    ntk: &NtkMatrix,
    f0: &DVector<f64>,
    y: &DVector<f64>,
    cfg: &LinDynConfig,
) -> Result<Vec<LooDelta>> {
    cfg.validate()?;
    let k = ntk.outputs();
    let n = ntk.examples();
    if f0.len() != ntk.dim() || y.len() != ntk.dim() {
        return Err(InfoError::Invalid(format!("targets must have length {}", ntk.dim())));
    }
    let residual = y - f0;
    let eig = ntk.eigen()?;
    let full = solve_coefficients(eig, &residual, cfg)?;
    if cfg.time == 0.0 {
        return Ok((0..n).map(|index| LooDelta { index, coefficients: DVector::zeros(ntk.dim()) }).collect());
    }
    let stationary = cfg.time.is_infinite();
    let a_inv = if stationary {
        let lam = cfg.weight_decay;
        let min = eig.min_value() + lam;
        if !(min > 1e-10 * (eig.max_value() + lam)) {
            return Err(InfoError::Singular { min_eigenvalue: min });
        }
        Some(SymMatrix::new(eig.apply_fn(|v| 1.0 / (v + lam)))?)
    } else {
        None
    };
    let a = ntk.regularized(cfg.weight_decay);
    (0..n)
        .into_par_iter()
        .map(|i| {
            let removed: Vec<usize> = (i * k..(i + 1) * k).collect();
            let keep: Vec<usize> = (0..ntk.dim()).filter(|r| !removed.contains(r)).collect();
            let r_minus = DVector::from_iterator(keep.len(), keep.iter().map(|&r| residual[r]));
            let a_minus = match &a_inv {
                Some(inv) => inverse_after_removal(inv, &a, &removed)?.mul_vec(&r_minus),
                None => {
                    let sub = ntk.matrix().submatrix(&keep);
                    let e = eigh(&sub)?;
                    solve_coefficients(&e, &r_minus, cfg)?
                }
            };
            let mut coefficients = full.clone();
            for (pos, &r) in keep.iter().enumerate() {
                coefficients[r] -= a_minus[pos];
            }
            Ok(LooDelta { index: i, coefficients })
        })
        .collect()
}

/// `(1/(2σ²m)) Σⱼ ‖Δf(x′ⱼ)‖²` for prediction differences on `m` probes (`m × k`).
pub fn fsi(pred_delta: &DMatrix<f64>, sigma: f64) -> Result<f64> {
    if pred_delta.nrows() == 0 {
        return Err(InfoError::EmptyProbes);
    }
    if !(sigma > 0.0) {
        return Err(InfoError::Invalid("σ must be positive".into()));
    }
    Ok(pred_delta.norm_squared() / (2.0 * sigma * sigma * pred_delta.nrows() as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfoConfig {
    pub dynamics: LinDynConfig,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub sketch_dim: Option<usize>,
    #[serde(default)]
    pub sketch_seed: u64,
    #[serde(default = "default_cap")]
    pub cap: usize,
}

fn default_sigma() -> f64 {
    1.0
}

fn default_cap() -> usize {
    DEFAULT_NTK_CAP
}

impl InfoConfig {
    pub fn new(dynamics: LinDynConfig) -> Self {
        Self { dynamics, sigma: 1.0, sketch_dim: None, sketch_seed: 0, cap: DEFAULT_NTK_CAP }
    }
}

/// F-SI of training examples w.r.t. a probe set, for any retained subset.
///
/// Kernels are computed once at `w₀`; scoring a subset restricts them.
#[derive(Debug, Clone)]
pub struct FsiScorer {
    ntk: NtkMatrix,
    cross: DMatrix<f64>,
    f0: DVector<f64>,
    y: DVector<f64>,
    outputs: usize,
    probes: usize,
    pub config: InfoConfig,
}

impl FsiScorer {
    pub fn new(spec: &MlpSpec, w0: &FlatWeights, train: &Dataset, probe_inputs: &DMatrix<f64>, config: InfoConfig) -> Result<Self> {
        if probe_inputs.nrows() == 0 {
            return Err(InfoError::EmptyProbes);
        }
        let sketch = config.sketch_dim.map(|d| JacobianSketch::new(spec, d, config.sketch_seed));
        let ntk = build_ntk(spec, w0, &train.inputs, sketch.as_ref(), config.cap)?;
        let cross = cross_ntk(spec, w0, probe_inputs, &train.inputs, sketch.as_ref())?;
        let f0 = flatten_rows(&forward(spec, w0, &train.inputs)?);
        Ok(Self {
            ntk,
            cross,
            f0,
            y: train.flat_targets(),
            outputs: spec.output_dim(),
            probes: probe_inputs.nrows(),
            config,
        })
    }

    pub fn ntk(&self) -> &NtkMatrix {
        &self.ntk
    }

    /// LOO deltas on the retained examples (indices into the training set).
    pub fn deltas(&self, retained: &[usize]) -> Result<(Vec<LooDelta>, DMatrix<f64>)> {
        let k = self.outputs;
        let rows: Vec<usize> = retained.iter().flat_map(|&i| (i * k)..(i * k + k)).collect();
        let ntk = NtkMatrix::new(self.ntk.matrix().submatrix(&rows), k)?;
        let f0 = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.f0[r]));
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&r| self.y[r]));
        let cross = self.cross.select_columns(&rows);
        let deltas = loo_weight_deltas(&ntk, &f0, &y, &self.config.dynamics)?;
        Ok((deltas, cross))
    }

    /// F-SI (and isotropic USI at the same σ) of each retained example.
    pub fn scores(&self, retained: &[usize]) -> Result<Vec<(f64, f64)>> {
        let k = self.outputs;
        let rows: Vec<usize> = retained.iter().flat_map(|&i| (i * k)..(i * k + k)).collect();
        let sub = self.ntk.matrix().submatrix(&rows);
        let (deltas, cross) = self.deltas(retained)?;
        let sigma = self.config.sigma;
        deltas
            .iter()
            .map(|d| {
                let pred = d.prediction_delta(&cross);
                let f = fsi(&DMatrix::from_row_slice(self.probes, k, pred.as_slice()), sigma)?;
                let u = super::usi_isotropic_from_kernel(&sub, &d.coefficients, sigma * sigma);
                Ok((f, u))
            })
            .collect()
    }

    pub fn fsi_scores(&self, retained: &[usize]) -> Result<Vec<f64>> {
        Ok(self.scores(retained)?.into_iter().map(|s| s.0).collect())
    }
}

