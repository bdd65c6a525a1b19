//! Dense symmetric linear algebra and seeded randomness.
//!
//! Matrices are stored as `nalgebra::DMatrix<f64>`; [`SymMatrix`] adds the
//! symmetry and finiteness guarantees the eigen and Lyapunov routines rely on.

mod eigen;
mod lyapunov;
mod rng;
mod update;

pub use eigen::{eigh, EigenDecomp, JACOBI_MAX_SWEEPS, JACOBI_TOL};
pub use lyapunov::solve_lyapunov;
pub use rng::Rng;
pub use update::{inverse_after_removal, psd_inverse_rank_update};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("Jacobi eigensolver did not converge for a {dim}x{dim} matrix after {sweeps} sweeps")]
    NoConvergence { dim: usize, sweeps: usize },
    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("inner block of the inverse update is singular; recompute the inverse directly")]
    SingularUpdate,
    #[error("matrix is singular")]
    Singular,
    #[error("invalid removal set: {0}")]
    InvalidRemoval(String),
}

pub type Result<T> = std::result::Result<T, NumError>;

/// Hybrid absolute/relative comparison: `|x - y| <= atol + rtol * |y|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { atol: 1e-10, rtol: 1e-7 }
    }
}

impl Tolerance {
    pub fn new(atol: f64, rtol: f64) -> Self {
        Self { atol, rtol }
    }

    pub fn close(&self, x: f64, y: f64) -> bool {
        (x - y).abs() <= self.atol + self.rtol * y.abs()
    }

    pub fn all_close(&self, xs: &[f64], ys: &[f64]) -> bool {
        xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| self.close(*x, *y))
    }
}

/// A finite symmetric matrix. Construction symmetrizes as `(A + Aᵀ)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(NumError::NotSquare { rows: m.nrows(), cols: m.ncols() });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(NumError::NonFinite);
        }
        let n = m.nrows();
        let mut inner = m;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (inner[(i, j)] + inner[(j, i)]);
                inner[(i, j)] = avg;
                inner[(j, i)] = avg;
            }
        }
        Ok(Self { inner })
    }

    pub fn from_row_major(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(NumError::DimensionMismatch { expected: dim * dim, got: entries.len() });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        Self { inner: DMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { inner: DMatrix::zeros(dim, dim) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// `F Fᵀ` for a feature matrix `F` (rows are feature vectors).
    pub fn gram(features: &DMatrix<f64>) -> Result<Self> {
        Self::new(features * features.transpose())
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.inner[(i, j)]);
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    /// `A + c I`.
    pub fn add_diagonal(&self, c: f64) -> Self {
        let mut inner = self.inner.clone();
        for i in 0..inner.nrows() {
            inner[(i, i)] += c;
        }
        Self { inner }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { inner: &self.inner * c }
    }

    /// Principal submatrix on the given (ordered) indices.
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let m = idx.len();
        let inner = DMatrix::from_fn(m, m, |i, j| self.inner[(idx[i], idx[j])]);
        Self { inner }
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.inner * v
    }

    /// `vᵀ A v`.
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.inner * v))
    }
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Solve `A x = b` for a symmetric positive definite `A` (Cholesky, LU fallback).
pub fn spd_solve(a: &SymMatrix, b: &DVector<f64>) -> Result<DVector<f64>> {
    if b.len() != a.dim() {
        return Err(NumError::DimensionMismatch { expected: a.dim(), got: b.len() });
    }
    if let Some(ch) = a.as_matrix().clone().cholesky() {
        return Ok(ch.solve(b));
    }
    a.as_matrix().clone().lu().solve(b).ok_or(NumError::Singular)
}

/// Inverse of a symmetric matrix via Cholesky, with an LU fallback.
pub fn sym_inverse(a: &SymMatrix) -> Result<SymMatrix> {
    if let Some(ch) = a.as_matrix().clone().cholesky() {
        return SymMatrix::new(ch.inverse());
    }
    let inv = a.as_matrix().clone().try_inverse().ok_or(NumError::Singular)?;
    SymMatrix::new(inv)
}
