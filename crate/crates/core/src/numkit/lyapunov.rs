use super::{eigh, NumError, Result, SymMatrix};

/// Solve `HΣ + ΣH = C` for symmetric positive definite `H`.
///
/// In the eigenbasis of `H` the equation decouples:
/// `Σ̃ᵢⱼ = C̃ᵢⱼ / (λᵢ + λⱼ)`.
pub fn solve_lyapunov(h: &SymMatrix, rhs: &SymMatrix) -> Result<SymMatrix> {
    if h.dim() != rhs.dim() {
        return Err(NumError::DimensionMismatch { expected: h.dim(), got: rhs.dim() });
    }
    let eig = eigh(h)?;
    let min = eig.min_value();
    if !(min > 1e-10) {
        return Err(NumError::NotPositiveDefinite { min_eigenvalue: min });
    }
    let q = &eig.vectors;
    let mut c = q.transpose() * rhs.as_matrix() * q;
    let n = h.dim();
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] /= eig.values[i] + eig.values[j];
        }
    }
    SymMatrix::new(q * c * q.transpose())
}
