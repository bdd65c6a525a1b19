use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{KernelError, Result};
use crate::netkit::{loss_and_grad, per_example_jacobian, Dataset, FlatWeights, Loss, MlpSpec, forward_cached, backward};
use crate::numkit::{eigh, EigenDecomp, Rng, SymMatrix};

pub const DEFAULT_NTK_CAP: usize = 4096;

/// Random coordinate subsets of each layer's parameters, rescaled by
/// `√(d_l / d₀)` so that sketched inner products are unbiased.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianSketch {
    pub seed: u64,
    pub dim_per_layer: usize,
    pub columns: Vec<usize>,
    pub scales: Vec<f64>,
}

impl JacobianSketch {
    pub fn new(spec: &MlpSpec, dim_per_layer: usize, seed: u64) -> Self {
        let mut columns = Vec::new();
        let mut scales = Vec::new();
        for (l, off) in spec.layer_offsets().into_iter().enumerate() {
            let dl = spec.layer_param_count(l);
            if dim_per_layer >= dl {
                columns.extend(off..off + dl);
                scales.extend(std::iter::repeat_n(1.0, dl));
                continue;
            }
            let mut rng = Rng::with_stream(seed, l as u64);
            let mut pick = rng.permutation(dl);
            pick.truncate(dim_per_layer);
            pick.sort_unstable();
            let s = (dl as f64 / dim_per_layer as f64).sqrt();
            columns.extend(pick.into_iter().map(|c| off + c));
            scales.extend(std::iter::repeat_n(s, dim_per_layer));
        }
        Self { seed, dim_per_layer, columns, scales }
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn project(&self, row: &[f64]) -> Vec<f64> {
        self.columns.iter().zip(&self.scales).map(|(&c, &s)| s * row[c]).collect()
    }
}

/// Stacked per-example Jacobians (`nk × d`, or `nk × sketch.dim()`).
pub fn jacobian_features(
    spec: &MlpSpec,
    w: &FlatWeights,
    inputs: &DMatrix<f64>,
    sketch: Option<&JacobianSketch>,
) -> Result<DMatrix<f64>> {
    let n = inputs.nrows();
    let k = spec.output_dim();
    let width = sketch.map_or(spec.param_count(), |s| s.dim());
    let blocks: Vec<DMatrix<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x: Vec<f64> = inputs.row(i).iter().copied().collect();
            let jac = per_example_jacobian(spec, w, &x)?;
            Ok(match sketch {
                None => jac,
                Some(s) => DMatrix::from_fn(k, width, |c, j| s.scales[j] * jac[(c, s.columns[j])]),
            })
        })
        .collect::<Result<_>>()?;
    let mut out = DMatrix::zeros(n * k, width);
    for (i, b) in blocks.iter().enumerate() {
        out.view_mut((i * k, 0), (k, width)).copy_from(b);
    }
    Ok(out)
}

/// Empirical NTK `Θ₀ = J Jᵀ` with a lazily computed eigendecomposition.
#[derive(Debug)]
pub struct NtkMatrix {
    matrix: SymMatrix,
    outputs: usize,
    eigen: OnceLock<EigenDecomp>,
}

impl Clone for NtkMatrix {
    fn clone(&self) -> Self {
        let eigen = OnceLock::new();
        if let Some(e) = self.eigen.get() {
            let _ = eigen.set(e.clone());
        }
        Self { matrix: self.matrix.clone(), outputs: self.outputs, eigen }
    }
}

impl NtkMatrix {
    pub fn new(matrix: SymMatrix, outputs: usize) -> Result<Self> {
        if outputs == 0 || matrix.dim() % outputs != 0 {
            return Err(KernelError::InvalidConfig(format!(
                "kernel dimension {} is not a multiple of {outputs} outputs",
                matrix.dim()
            )));
        }
        Ok(Self { matrix, outputs, eigen: OnceLock::new() })
    }

    pub fn from_features(features: &DMatrix<f64>, outputs: usize) -> Result<Self> {
        Self::new(SymMatrix::gram(features)?, outputs)
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn examples(&self) -> usize {
        self.dim() / self.outputs
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn eigen(&self) -> Result<&EigenDecomp> {
        if let Some(e) = self.eigen.get() {
            return Ok(e);
        }
        let e = eigh(&self.matrix)?;
        let _ = self.eigen.set(e);
        Ok(self.eigen.get().unwrap())
    }

    /// `Θ₀ + λI`.
    pub fn regularized(&self, lambda: f64) -> SymMatrix {
        self.matrix.add_diagonal(lambda)
    }

    /// Kernel restricted to the retained examples (all their output rows).
    pub fn without_examples(&self, removed: &[usize]) -> Result<NtkMatrix> {
        let idx = retained_rows(self.examples(), self.outputs, removed);
        NtkMatrix::new(self.matrix.submatrix(&idx), self.outputs)
    }
}

/// Row indices kept after dropping whole examples.
pub(crate) fn retained_rows(n: usize, k: usize, removed: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !removed.contains(i)).flat_map(|i| (i * k)..(i * k + k)).collect()
}

pub fn build_ntk(
    spec: &MlpSpec,
    w0: &FlatWeights,
    inputs: &DMatrix<f64>,
    sketch: Option<&JacobianSketch>,
    cap: usize,
) -> Result<NtkMatrix> {
    let dim = inputs.nrows() * spec.output_dim();
    if inputs.nrows() == 0 {
        return Err(KernelError::InvalidConfig("empty input set".into()));
    }
    if dim > cap {
        return Err(KernelError::TooLarge { dim, cap });
    }
    let feats = jacobian_features(spec, w0, inputs, sketch)?;
    NtkMatrix::from_features(&feats, spec.output_dim())
}

/// Cross kernel `Θ₀(x′, x) = J(x′) J(x)ᵀ` (`mk × nk`) in the same feature space.
pub fn cross_ntk(
    spec: &MlpSpec,
    w0: &FlatWeights,
    probe_inputs: &DMatrix<f64>,
    train_inputs: &DMatrix<f64>,
    sketch: Option<&JacobianSketch>,
) -> Result<DMatrix<f64>> {
    let jp = jacobian_features(spec, w0, probe_inputs, sketch)?;
    let jt = jacobian_features(spec, w0, train_inputs, sketch)?;
    Ok(jp * jt.transpose())
}

/// Gradients of each example's own loss, one row per example (`n × d`).
pub fn per_example_gradients(spec: &MlpSpec, w: &FlatWeights, data: &Dataset, loss: Loss) -> Result<DMatrix<f64>> {
    let n = data.len();
    let d = spec.param_count();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = data.inputs.rows(i, 1).into_owned();
            let y = data.targets.rows(i, 1).into_owned();
            let cache = forward_cached(spec, w, &x)?;
            let (_, g) = loss_and_grad(loss, cache.logits(), &y)?;
            Ok(backward(spec, w, &cache, &g, None)?)
        })
        .collect::<Result<_>>()?;
    let mut out = DMatrix::zeros(n, d);
    for (i, r) in rows.iter().enumerate() {
        out.row_mut(i).copy_from_slice(r);
    }
    Ok(out)
}

/// Per-sample gradient covariance `Λ(w) = (1/n)Σ gᵢgᵢᵀ − ḡḡᵀ`.
///
/// A mini-batch of size `b` drawn with replacement has gradient covariance `Λ/b`.
pub fn sgd_noise_cov(spec: &MlpSpec, w: &FlatWeights, data: &Dataset, loss: Loss) -> Result<SymMatrix> {
    if data.len() < 2 {
        return Err(KernelError::InvalidConfig("gradient covariance needs at least 2 examples".into()));
    }
    let g = per_example_gradients(spec, w, data, loss)?;
    let n = g.nrows() as f64;
    let mean = g.row_mean();
    let mut centered = g;
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    Ok(SymMatrix::new(centered.transpose() * &centered / n)?)
}

/// Fisher-type matrix `F = (1/m) Σⱼ J(x′ⱼ)ᵀ J(x′ⱼ)`.
#[derive(Debug, Clone)]
pub enum FisherMatrix {
    Dense(SymMatrix),
    /// Matrix-free form holding the stacked probe Jacobians.
    Operator { features: DMatrix<f64>, probes: usize },
}

impl FisherMatrix {
    pub fn dim(&self) -> usize {
        match self {
            FisherMatrix::Dense(m) => m.dim(),
            FisherMatrix::Operator { features, .. } => features.ncols(),
        }
    }

    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            FisherMatrix::Dense(m) => m.mul_vec(v),
            FisherMatrix::Operator { features, probes } => features.tr_mul(&(features * v)) / *probes as f64,
        }
    }

    /// `vᵀ F v`.
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        match self {
            FisherMatrix::Dense(m) => m.quad_form(v),
            FisherMatrix::Operator { features, probes } => (features * v).norm_squared() / *probes as f64,
        }
    }
}

/// Dense when `d ≤ cap`, otherwise a matrix-free handle.
pub fn fisher_matrix(spec: &MlpSpec, w: &FlatWeights, probe_inputs: &DMatrix<f64>, cap: usize) -> Result<FisherMatrix> {
    let m = probe_inputs.nrows();
    if m == 0 {
        return Err(KernelError::InvalidConfig("empty probe set".into()));
    }
    let features = jacobian_features(spec, w, probe_inputs, None)?;
    if spec.param_count() <= cap {
        Ok(FisherMatrix::Dense(SymMatrix::new(features.transpose() * &features / m as f64)?))
    } else {
        Ok(FisherMatrix::Operator { features, probes: m })
    }
}
