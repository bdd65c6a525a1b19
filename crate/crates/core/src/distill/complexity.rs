use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{DistillError, Result};
use crate::kernels::NtkMatrix;
use crate::netkit::softmax_rows;
use crate::numkit::{Rng, SymMatrix};

/// Eigenvalue floor (relative to the largest) below which `K` counts as singular.
pub const SINGULAR_RTOL: f64 = 1e-12;

pub const DEFAULT_LAMBDA_SWEEP: [f64; 8] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityValues {
    /// `Yᵀ K⁻¹ Y`, or `+∞` for singular `K`.
    pub raw: f64,
    /// `(1/n) √((Y − f)ᵀ K⁻¹ (Y − f) · tr K)`; equals `adjusted_star` without `f`.
    pub adjusted: f64,
    /// `(1/n) √(Yᵀ K⁻¹ Y · tr K)`.
    pub adjusted_star: f64,
    /// `√(Yᵀ K⁻¹ Y) / ‖Y‖`.
    pub normalized: f64,
    pub trace: f64,
    pub condition: f64,
    pub note: Option<String>,
}

/// Complexity of flattened targets `y` (example-major, length `nk`).
/// `predictions` switches `adjusted` to residual targets.
pub fn supervision_complexity(k: &NtkMatrix, y: &DVector<f64>, predictions: Option<&DVector<f64>>) -> Result<ComplexityValues> {
    if y.len() != k.dim() || predictions.is_some_and(|p| p.len() != k.dim()) {
        return Err(DistillError::Invalid(format!("targets must have length {}", k.dim())));
    }
    let eig = k.eigen()?;
    let trace = k.matrix().trace();
    let n = k.examples() as f64;
    let (lo, hi) = (eig.min_value(), eig.max_value());
    if !(lo > SINGULAR_RTOL * hi) {
        return Ok(ComplexityValues {
            raw: f64::INFINITY,
            adjusted: f64::INFINITY,
            adjusted_star: f64::INFINITY,
            normalized: f64::INFINITY,
            trace,
            condition: f64::INFINITY,
            note: Some(format!("kernel is singular (eigenvalues {lo:e} .. {hi:e})")),
        });
    }
    let quad = |v: &DVector<f64>| eig.vectors.tr_mul(v).iter().zip(eig.values.iter()).map(|(c, l)| c * c / l).sum::<f64>();
    let raw = quad(y);
    let adjusted_star = (raw * trace).sqrt() / n;
    let adjusted = match predictions {
        Some(f) => (quad(&(y - f)) * trace).sqrt() / n,
        None => adjusted_star,
    };
    let norm = y.norm();
    let normalized = if norm > 0.0 { raw.sqrt() / norm } else { 0.0 };
    Ok(ComplexityValues { raw, adjusted, adjusted_star, normalized, trace, condition: hi / lo, note: None })
}

/// `softmax(g/τ) − 1/k`, flattened example-major.
pub fn centered_soft_targets(logits: &DMatrix<f64>, tau: f64) -> DVector<f64> {
    let k = logits.ncols() as f64;
    let p = softmax_rows(logits, tau).map(|v| v - 1.0 / k);
    crate::netkit::flatten_rows(&p)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinNormReport {
    /// `Yᵀ K⁻¹ Y`.
    pub target: f64,
    /// `(λ, αᵀKα)` with `α = (K + λI)⁻¹ Y`, in sweep order.
    pub norms: Vec<(f64, f64)>,
    /// Every norm is at most the target.
    pub bounded: bool,
    /// The gap to the target never grows along the sweep.
    pub monotone: bool,
}

/// RKHS norms of kernel ridge solutions over a decreasing `λ` sweep.
pub fn min_norm_interpolant_check(k: &SymMatrix, y: &DVector<f64>, lambdas: &[f64]) -> Result<MinNormReport> {
    if y.len() != k.dim() {
        return Err(DistillError::Invalid(format!("targets must have length {}", k.dim())));
    }
    if lambdas.iter().any(|&l| !(l > 0.0)) || lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(DistillError::Invalid("lambda sweep must be positive and strictly decreasing".into()));
    }
    let km = k.as_matrix();
    let solve = |m: DMatrix<f64>| -> Result<DVector<f64>> {
        m.cholesky().map(|c| c.solve(y)).ok_or_else(|| DistillError::Invalid("kernel is not positive definite".into()))
    };
    let alpha = solve(km.clone())?;
    let target = y.dot(&alpha);
    let mut norms = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let a = solve(k.add_diagonal(l).into_matrix())?;
        norms.push((l, a.dot(&(km * &a))));
    }
    // Relative slack for roundoff in the two solves.
    let slack = 1e-9 * target.abs().max(f64::MIN_POSITIVE);
    let bounded = norms.iter().all(|&(_, v)| v <= target + slack);
    let monotone = norms.windows(2).all(|w| (target - w[1].1).abs() <= (target - w[0].1).abs() + slack);
    Ok(MinNormReport { target, norms, bounded, monotone })
}

/// PD kernel `Q diag(spectrum) Qᵀ` whose leading eigenvector is `signs/√n`.
pub fn aligned_kernel(signs: &[f64], spectrum: &[f64], rng: &mut Rng) -> Result<SymMatrix> {
    let n = signs.len();
    if spectrum.len() != n || n == 0 {
        return Err(DistillError::Invalid("spectrum and sign vector lengths differ".into()));
    }
    if spectrum.iter().any(|&s| !(s > 0.0)) || spectrum.windows(2).any(|w| w[1] > w[0]) {
        return Err(DistillError::Invalid("spectrum must be positive and non-increasing".into()));
    }
    let mut m = DMatrix::from_fn(n, n, |_, _| rng.normal());
    m.set_column(0, &DVector::from_column_slice(signs));
    let q = m.qr().q();
    let d = DMatrix::from_diagonal(&DVector::from_column_slice(spectrum));
    Ok(SymMatrix::new(&q * d * q.transpose())?)
}
