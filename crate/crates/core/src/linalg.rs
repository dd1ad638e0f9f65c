//! Small dense linear algebra used by the tensor engine.
//!
//! Square matrices are stored row-major in flat slices. The generic routines
//! work for any [`Scalar`]; spectral routines (SVD, eigenvalues) go through
//! nalgebra on `f64`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[inline]
pub fn ix2(n: usize, a: usize, b: usize) -> usize {
    a * n + b
}

#[inline]
pub fn ix3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

#[inline]
pub fn ix4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

#[inline]
pub fn ix5(n: usize, a: usize, b: usize, c: usize, d: usize, e: usize) -> usize {
    (((a * n + b) * n + c) * n + d) * n + e
}

/// Inverse of an `n×n` matrix by Gauss–Jordan elimination with partial pivoting.
pub fn invert<S: Scalar>(m: &[S], n: usize) -> Result<Vec<S>> {
    let mut a = m.to_vec();
    let mut inv = vec![S::zero(); n * n];
    for i in 0..n {
        inv[ix2(n, i, i)] = S::one();
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| {
                a[ix2(n, r, col)]
                    .re()
                    .abs()
                    .total_cmp(&a[ix2(n, s, col)].re().abs())
            })
            .unwrap_or(col);
        if a[ix2(n, pivot, col)].re() == 0.0 {
            return Err(Error::DegenerateMetric {
                condition: f64::INFINITY,
                limit: 0.0,
            });
        }
        if pivot != col {
            for k in 0..n {
                a.swap(ix2(n, pivot, k), ix2(n, col, k));
                inv.swap(ix2(n, pivot, k), ix2(n, col, k));
            }
        }
        let p = a[ix2(n, col, col)].recip();
        for k in 0..n {
            a[ix2(n, col, k)] *= p;
            inv[ix2(n, col, k)] *= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = a[ix2(n, r, col)];
            if factor.is_zero() {
                continue;
            }
            for k in 0..n {
                let (ac, ic) = (a[ix2(n, col, k)], inv[ix2(n, col, k)]);
                a[ix2(n, r, k)] -= factor * ac;
                inv[ix2(n, r, k)] -= factor * ic;
            }
        }
    }
    Ok(inv)
}

pub fn to_dmatrix<S: Scalar>(m: &[S], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |r, c| m[r * cols + c].re())
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// 2-norm condition number of a square matrix (infinite if singular).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Numerical rank: number of singular values above `tol`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    singular_values(m).into_iter().filter(|&s| s > tol).count()
}

/// Orthonormal basis (as columns) of the span of the given columns.
pub fn orthonormal_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-12 * smax.max(f64::MIN_POSITIVE))
        .collect();
    DMatrix::from_fn(m.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

/// Sine of the largest principal angle between two column spans of equal dimension.
/// Returns 1 when dimensions differ.
pub fn subspace_sine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = orthonormal_columns(a);
    let qb = orthonormal_columns(b);
    if qa.ncols() != qb.ncols() {
        return 1.0;
    }
    if qa.ncols() == 0 {
        return 0.0;
    }
    let resid = &qa - &qb * (qb.transpose() * &qa);
    singular_values(&resid)
        .first()
        .copied()
        .unwrap_or(0.0)
        .min(1.0)
}

/// Characteristic polynomial `det(xI − M)` by Faddeev–LeVerrier.
/// Coefficients are returned leading-first: `[1, c1, …, cn]`.
pub fn charpoly(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut coeffs = vec![1.0];
    let mut mk = DMatrix::<f64>::zeros(n, n);
    let id = DMatrix::<f64>::identity(n, n);
    for k in 1..=n {
        mk = m * (&mk + &id * coeffs[k - 1]);
        let c = -mk.trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

/// Real roots of a monic-or-not polynomial given leading-first coefficients,
/// via eigenvalues of the companion matrix. Complex roots are returned in the
/// second vector as `(re, im)`.
pub fn companion_roots(coeffs: &[f64]) -> (Vec<f64>, Vec<(f64, f64)>) {
    let lead = coeffs[0];
    let n = coeffs.len() - 1;
    let mut c = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        c[(0, j)] = -coeffs[j + 1] / lead;
    }
    for i in 1..n {
        c[(i, i - 1)] = 1.0;
    }
    let ev = c.complex_eigenvalues();
    let mut real = Vec::new();
    let mut complex = Vec::new();
    for z in ev.iter() {
        if z.im.abs() <= 1e-12 * z.norm().max(1.0) {
            real.push(z.re);
        } else {
            complex.push((z.re, z.im));
        }
    }
    real.sort_by(|a, b| a.total_cmp(b));
    (real, complex)
}

pub fn max_abs<S: Scalar>(v: &[S]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.re().abs()))
}

pub fn dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::Dual;

    #[test]
    fn inverse_of_indefinite_matrix() {
        let m = [0.0, 0.5, 0.0, 0.5, 2.0, 0.0, 0.0, 0.0, -1.0];
        let inv = invert(&m, 3).unwrap();
        let a = to_dmatrix(&m, 3, 3) * to_dmatrix(&inv, 3, 3);
        assert!((a - DMatrix::identity(3, 3)).abs().max() < 1e-14);
    }

    #[test]
    fn inverse_propagates_derivatives() {
        // d/dx inv([[x, 1], [1, 2]]) at x = 3
        let x = Dual::variable(3.0f64);
        let one = Dual::constant(1.0);
        let m = [x, one, one, Dual::constant(2.0)];
        let inv = invert(&m, 2).unwrap();
        // inverse = [[2, -1], [-1, x]] / (2x - 1)
        let det: f64 = 5.0;
        assert!((inv[0].re - 2.0 / det).abs() < 1e-15);
        assert!((inv[0].eps + 2.0 * 2.0 / (det * det)).abs() < 1e-15);
        assert!((inv[3].eps - (det - 3.0 * 2.0) / (det * det)).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        assert!(
            invert(&[1.0, 2.0, 2.0, 4.0], 2).is_err() || {
                // partial pivoting may leave a tiny pivot; condition number catches it
                condition_number(&to_dmatrix(&[1.0, 2.0, 2.0, 4.0], 2, 2)) > 1e15
            }
        );
    }

    #[test]
    fn charpoly_of_diagonal() {
        let m = DMatrix::from_diagonal(&dvector(&[1.0, 2.0, 3.0]));
        let c = charpoly(&m);
        let want = [1.0, -6.0, 11.0, -6.0];
        for (a, b) in c.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn subspace_sine_detects_rotation() {
        let a = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let b = DMatrix::from_column_slice(3, 1, &[2.0, 0.0, 0.0]);
        let c = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]);
        assert!(subspace_sine(&a, &b) < 1e-15);
        assert!((subspace_sine(&a, &c) - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
