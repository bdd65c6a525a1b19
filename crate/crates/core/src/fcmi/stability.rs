use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DataSource, FcmiError, NearestNeighbor, Result};
use crate::netkit::{forward, init_weights, train, Dataset};
use crate::numkit::Rng;
use crate::stats::{mean, std_err};

/// A deterministic method with real-valued outputs.
pub trait Regressor: Sync {
    fn fit_outputs(&self, train: &Dataset, eval: &DMatrix<f64>, seed: u64) -> Result<DMatrix<f64>>;
}

impl Regressor for super::MlpTrainer {
    fn fit_outputs(&self, data: &Dataset, eval: &DMatrix<f64>, seed: u64) -> Result<DMatrix<f64>> {
        let w0 = init_weights(&self.spec, &mut Rng::new(seed));
        let traj = train(&self.spec, &w0, data, &self.config)?;
        Ok(forward(&self.spec, &traj.final_weights, eval)?)
    }
}

impl Regressor for super::ConstantTrainer {
    fn fit_outputs(&self, data: &Dataset, eval: &DMatrix<f64>, _seed: u64) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(eval.nrows(), data.targets.ncols());
        out.column_mut(self.class).fill(1.0);
        Ok(out)
    }
}

impl Regressor for NearestNeighbor {
    fn fit_outputs(&self, data: &Dataset, eval: &DMatrix<f64>, _seed: u64) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(eval.nrows(), data.targets.ncols());
        for (r, row) in eval.row_iter().enumerate() {
            let j = Self::nearest(&data.inputs, &row.iter().copied().collect::<Vec<_>>());
            out.row_mut(r).copy_from(&data.targets.row(j));
        }
        Ok(out)
    }
}

/// Ridge regression without intercept, `w = (XᵀX + λI)⁻¹ Xᵀ Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeastSquares {
    pub ridge: f64,
}

impl Regressor for LeastSquares {
    fn fit_outputs(&self, data: &Dataset, eval: &DMatrix<f64>, _seed: u64) -> Result<DMatrix<f64>> {
        let x = &data.inputs;
        let gram = x.transpose() * x + DMatrix::identity(x.ncols(), x.ncols()) * self.ridge;
        let w = gram
            .lu()
            .solve(&(x.transpose() * &data.targets))
            .ok_or_else(|| FcmiError::Invalid("singular least-squares system".into()))?;
        Ok(eval * w)
    }
}

/// Monte-Carlo estimates of the squared stabilities with standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityEstimate {
    /// `E‖f(S, Zᵢ) − f(S⁽ⁱ⁾, Zᵢ)‖²`.
    pub self_sq: (f64, f64),
    /// Same at an independent test point.
    pub test_sq: (f64, f64),
    /// Same at another training point, averaged over `j ≠ i`.
    pub train_sq: (f64, f64),
}

impl StabilityEstimate {
    /// `(β, β₁, β₂)`: self, test and train stability.
    pub fn betas(&self) -> (f64, f64, f64) {
        (self.self_sq.0.sqrt(), self.test_sq.0.sqrt(), self.train_sq.0.sqrt())
    }
}

/// Squared output changes at `Zᵢ`, at `z_test`, and (mean) at `Zⱼ`, `j ≠ i`,
/// when example `i` of `s` is replaced by `z_prime`.
pub fn stability_replicate(
    method: &dyn Regressor,
    s: &Dataset,
    z_prime: &Dataset,
    z_test: &DMatrix<f64>,
    i: usize,
    seed: u64,
) -> Result<(f64, f64, f64)> {
    let n = s.len();
    let mut replaced = s.clone();
    replaced.inputs.row_mut(i).copy_from(&z_prime.inputs.row(0));
    replaced.targets.row_mut(i).copy_from(&z_prime.targets.row(0));
    let mut eval = DMatrix::zeros(n + 1, s.inputs.ncols());
    eval.rows_mut(0, n).copy_from(&s.inputs);
    eval.row_mut(n).copy_from(&z_test.row(0));
    let a = method.fit_outputs(s, &eval, seed)?;
    let b = method.fit_outputs(&replaced, &eval, seed)?;
    let diff: Vec<f64> = (0..=n).map(|r| DVector::from_iterator(a.ncols(), (a.row(r) - b.row(r)).iter().copied()).norm_squared()).collect();
    let train = if n > 1 { (0..n).filter(|&j| j != i).map(|j| diff[j]).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
    Ok((diff[i], diff[n], train))
}

/// Replace-one retraining over `replicates` independent draws of `(S, Z′, Z_test, i)`.
pub fn measure_self_stability(
    method: &dyn Regressor,
    source: &dyn DataSource,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<StabilityEstimate> {
    if n == 0 || replicates == 0 {
        return Err(FcmiError::Invalid("need n ≥ 1 and at least one replicate".into()));
    }
    let mut vals = (Vec::new(), Vec::new(), Vec::new());
    for rep in 0..replicates {
        let mut rng = Rng::with_stream(seed, rep as u64);
        let all = source.draw(n + 2, &mut rng)?;
        let s = all.select(&(0..n).collect::<Vec<_>>());
        let z_prime = all.select(&[n]);
        let z_test = all.select(&[n + 1]).inputs;
        let i = rng.below(n);
        let (a, b, c) = stability_replicate(method, &s, &z_prime, &z_test, i, rng.next_seed())?;
        vals.0.push(a);
        vals.1.push(b);
        vals.2.push(c);
    }
    let pack = |v: &[f64]| (mean(v), std_err(v));
    Ok(StabilityEstimate { self_sq: pack(&vals.0), test_sq: pack(&vals.1), train_sq: pack(&vals.2) })
}
