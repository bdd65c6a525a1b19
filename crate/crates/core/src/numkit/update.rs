//! Inverse of a principal block after deleting rows/columns.
//!
//! With `A = [[A₁₁, A₁₂], [A₂₁, A₂₂]]`, let `B` be the leading block of `A⁻¹`.
//! Then `A₁₁⁻¹ = B − B A₁₂ (A₂₂ + A₂₁ B A₁₂)⁻¹ A₂₁ B`.

use std::ops::Range;

use nalgebra::DMatrix;

use super::{NumError, Result, SymMatrix};

/// Inverse of the leading block of `a` once the trailing `removed` block is dropped.
pub fn psd_inverse_rank_update(
    a_inv: &SymMatrix,
    a: &SymMatrix,
    removed: Range<usize>,
) -> Result<SymMatrix> {
    let n = a.dim();
    if a_inv.dim() != n {
        return Err(NumError::DimensionMismatch { expected: n, got: a_inv.dim() });
    }
    if removed.end != n || removed.start >= removed.end {
        return Err(NumError::InvalidRemoval(format!(
            "expected a non-empty trailing block ending at {n}, got {}..{}",
            removed.start, removed.end
        )));
    }
    let keep = removed.start;
    let r = n - keep;
    let f = a_inv.as_matrix();
    let am = a.as_matrix();
    let f11 = f.view((0, 0), (keep, keep)).into_owned();
    let a12 = am.view((0, keep), (keep, r)).into_owned();
    let a21 = am.view((keep, 0), (r, keep)).into_owned();
    let a22 = am.view((keep, keep), (r, r)).into_owned();

    let f11_a12 = &f11 * &a12;
    let inner = &a22 + &a21 * &f11_a12;
    let inner_inv = checked_inverse(inner)?;
    let correction = &f11_a12 * inner_inv * f11_a12.transpose();
    SymMatrix::new(f11 - correction)
}

/// Inverse of `a` with the listed indices removed; the retained indices keep
/// their original relative order.
pub fn inverse_after_removal(
    a_inv: &SymMatrix,
    a: &SymMatrix,
    removed: &[usize],
) -> Result<SymMatrix> {
    let n = a.dim();
    let mut mask = vec![false; n];
    for &i in removed {
        if i >= n || mask[i] {
            return Err(NumError::InvalidRemoval(format!("index {i} out of range or repeated")));
        }
        mask[i] = true;
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
    let keep = order.len();
    order.extend(removed.iter().copied());
    let pa = a.submatrix(&order);
    let pa_inv = a_inv.submatrix(&order);
    psd_inverse_rank_update(&pa_inv, &pa, keep..n)
}

fn checked_inverse(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = super::max_abs(&m);
    if scale == 0.0 {
        return Err(NumError::SingularUpdate);
    }
    let lu = m.lu();
    let u = lu.u();
    let min_pivot = u.diagonal().iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if min_pivot <= 1e-14 * scale {
        return Err(NumError::SingularUpdate);
    }
    lu.try_inverse().ok_or(NumError::SingularUpdate)
}
