//! Cyclic Jacobi eigensolver for symmetric matrices.

use nalgebra::{DMatrix, DVector};

use super::{NumError, Result, SymMatrix};

pub const JACOBI_MAX_SWEEPS: usize = 50;
pub const JACOBI_TOL: f64 = 1e-12;

/// `A = Q diag(values) Qᵀ` with eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenDecomp {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `λ_max / λ_min`, infinite when the smallest eigenvalue is not positive.
    pub fn condition_number(&self) -> f64 {
        let lo = self.min_value();
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            self.max_value() / lo
        }
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.apply_fn(|x| x)
    }

    /// `Q diag(f(λ)) Qᵀ`.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let q = &self.vectors;
        let mut scaled = q.clone();
        for (j, lam) in self.values.iter().enumerate() {
            let fj = f(*lam);
            scaled.column_mut(j).scale_mut(fj);
        }
        scaled * q.transpose()
    }

    /// `Q diag(f(λ)) Qᵀ v` without forming the matrix.
    pub fn apply_fn_vec(&self, f: impl Fn(f64) -> f64, v: &DVector<f64>) -> DVector<f64> {
        let mut coeffs = self.vectors.tr_mul(v);
        for (c, lam) in coeffs.iter_mut().zip(self.values.iter()) {
            *c *= f(*lam);
        }
        &self.vectors * coeffs
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Stops once the off-diagonal Frobenius norm falls below
/// `JACOBI_TOL * ‖A‖_F`, failing after `JACOBI_MAX_SWEEPS` sweeps.
pub fn eigh(a: &SymMatrix) -> Result<EigenDecomp> {
    let n = a.dim();
    let mut m: Vec<f64> = a.row_major();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let total: f64 = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut converged = n <= 1;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    off += m[i * n + j] * m[i * n + j];
                }
            }
        }
        let off = off.sqrt();
        if off <= JACOBI_TOL * total || off <= f64::MIN_POSITIVE {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let tau = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(NumError::NoConvergence { dim: n, sweeps: JACOBI_MAX_SWEEPS });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].total_cmp(&m[i * n + i]).then(i.cmp(&j)));
    let values = DVector::from_iterator(n, order.iter().map(|&i| m[i * n + i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| v[r * n + order[c]]);
    Ok(EigenDecomp { values, vectors })
}
