//! Dense Cholesky-based helpers for symmetric positive definite matrices.
//!
//! Everything here operates on small-to-moderate `p × p` matrices
//! (a few hundred rows at most), so plain row-major loops are enough.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
///
/// Fails when a pivot is not strictly positive, or is negligible relative
/// to the largest diagonal entry of `A`.
pub fn cholesky(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::invalid("cholesky of a non-square matrix"));
    }
    let scale = (0..n).map(|i| a[[i, i]].abs()).fold(0.0_f64, f64::max);
    let floor = scale * 1e-14;
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if !(d > floor) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / d;
        }
    }
    Ok(l)
}

/// `log det A` from a Cholesky factor of `A`.
pub fn log_det_from_cholesky(l: &Array2<f64>) -> f64 {
    2.0 * l.diag().iter().map(|d| d.ln()).sum::<f64>()
}

/// Inverse of `A` given its Cholesky factor. The result is exactly symmetric.
pub fn inverse_from_cholesky(l: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    // L⁻¹ by forward substitution, column by column.
    let mut linv = Array2::<f64>::zeros((n, n));
    for c in 0..n {
        linv[[c, c]] = 1.0 / l[[c, c]];
        for i in (c + 1)..n {
            let mut s = 0.0;
            for k in c..i {
                s -= l[[i, k]] * linv[[k, c]];
            }
            linv[[i, c]] = s / l[[i, i]];
        }
    }
    // A⁻¹ = L⁻ᵀ L⁻¹
    let mut inv = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = 0.0;
            for k in i..n {
                s += linv[[k, i]] * linv[[k, j]];
            }
            inv[[i, j]] = s;
            inv[[j, i]] = s;
        }
    }
    inv
}

pub fn inverse_spd(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    Ok(inverse_from_cholesky(&cholesky(a)?))
}

pub fn is_positive_definite(a: ArrayView2<'_, f64>) -> bool {
    cholesky(a).is_ok()
}

/// Largest `|A_ij − A_ji|`.
pub fn asymmetry(a: ArrayView2<'_, f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn inverse_of_known_matrix() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let inv = inverse_spd(a.view()).unwrap();
        // det = 8
        let expected = array![[3.0 / 8.0, -2.0 / 8.0], [-2.0 / 8.0, 4.0 / 8.0]];
        for (x, y) in inv.iter().zip(expected.iter()) {
            assert!((x - y).abs() < 1e-14);
        }
        let l = cholesky(a.view()).unwrap();
        assert!((log_det_from_cholesky(&l) - 8.0_f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(matches!(cholesky(a.view()), Err(Error::NotPositiveDefinite)));
        let b = array![[1.0, 0.0], [0.0, -1.0]];
        assert!(!is_positive_definite(b.view()));
    }
}
