use log::warn;
use nalgebra::{DMatrix, DVector};

use super::{KernelError, Result};
use crate::netkit::{jvp, unflatten_rows, vjp, FlatWeights, MlpSpec};
use crate::numkit::Rng;

/// A symmetric linear operator applied matrix-free.
pub trait KernelOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>>;
}

pub struct DenseOperator<'a>(pub &'a DMatrix<f64>);

impl KernelOperator for DenseOperator<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.0 * v)
    }
}

/// `K v = J (Jᵀ v)` from stacked Jacobian rows.
pub struct FeatureOperator<'a>(pub &'a DMatrix<f64>);

impl KernelOperator for FeatureOperator<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.0 * self.0.tr_mul(v))
    }
}

/// NTK action through one vector-Jacobian and one Jacobian-vector product.
pub struct NtkOperator<'a> {
    pub spec: &'a MlpSpec,
    pub weights: &'a FlatWeights,
    pub inputs: &'a DMatrix<f64>,
}

impl KernelOperator for NtkOperator<'_> {
    fn dim(&self) -> usize {
        self.inputs.nrows() * self.spec.output_dim()
    }

    fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let k = self.spec.output_dim();
        let cot = unflatten_rows(v, k);
        let pull = vjp(self.spec, self.weights, self.inputs, &cot)?;
        let push = jvp(self.spec, self.weights, self.inputs, &pull)?;
        Ok(crate::netkit::flatten_rows(&push))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub used: usize,
    pub skipped: usize,
}

/// Monte-Carlo estimate of `E[⟨K_f V, K_g V⟩ / (‖K_f V‖‖K_g V‖)]`, `V ~ N(0, I)`.
pub fn kernel_similarity(
    kf: &dyn KernelOperator,
    kg: &dyn KernelOperator,
    probes: usize,
    rng: &mut Rng,
) -> Result<SimilarityEstimate> {
    let dim = kf.dim();
    if kg.dim() != dim {
        return Err(KernelError::Shape { what: "operator dimension", expected: dim, got: kg.dim() });
    }
    if probes == 0 {
        return Err(KernelError::InvalidConfig("at least one probe is required".into()));
    }
    let mut vals = Vec::with_capacity(probes);
    let mut skipped = 0;
    for _ in 0..probes {
        let v = DVector::from_fn(dim, |_, _| rng.normal());
        let a = kf.apply(&v)?;
        let b = kg.apply(&v)?;
        let (na, nb) = (a.norm(), b.norm());
        if na == 0.0 || nb == 0.0 {
            skipped += 1;
            continue;
        }
        vals.push((a.dot(&b) / (na * nb)).clamp(-1.0, 1.0));
    }
    if skipped > 0 {
        warn!("kernel similarity skipped {skipped} of {probes} probes with zero products");
    }
    if vals.is_empty() {
        return Err(KernelError::DegenerateProbes);
    }
    let m = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let var = if vals.len() > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0) } else { 0.0 };
    Ok(SimilarityEstimate { mean, stderr: (var / m).sqrt(), used: vals.len(), skipped })
}
