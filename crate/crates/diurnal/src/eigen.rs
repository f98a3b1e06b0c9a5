//! Symmetric eigensolver built on cyclic Jacobi rotations.
//!
//! Each rotation annihilates one off-diagonal element; sweeps repeat until
//! the off-diagonal Frobenius norm falls below [`OFF_DIAGONAL_TOLERANCE`].
//! Convergence is quadratic and robust for real symmetric matrices, which is
//! all this crate needs (correlation matrices are symmetric PSD).

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Hard cap on Jacobi sweeps before reporting non-convergence.
pub const MAX_SWEEPS: usize = 100;

/// Convergence threshold on the off-diagonal Frobenius norm.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;

/// Eigenvalues with matching unit eigenvectors.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit-Euclidean-norm eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

/// Flips a vector so its entry of largest magnitude is positive.
///
/// The first index attaining the maximum magnitude decides.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).copied().unwrap_or(0.0) < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    Ordering::Equal
}

impl SymmetricEigen {
    /// Orders eigenpairs by descending eigenvalue and applies the sign
    /// convention of [`fix_sign`]. Exact eigenvalue ties are broken by the
    /// first differing component of the sign-fixed eigenvectors.
    pub fn into_sorted_descending(mut self) -> SymmetricEigen {
        for v in &mut self.vectors {
            fix_sign(v);
        }
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&i, &j| {
            self.values[j]
                .total_cmp(&self.values[i])
                .then_with(|| lex_cmp(&self.vectors[i], &self.vectors[j]))
        });
        SymmetricEigen {
            values: idx.iter().map(|&i| self.values[i]).collect(),
            vectors: idx.iter().map(|&i| self.vectors[i].clone()).collect(),
        }
    }
}

/// Diagonalizes a symmetric matrix given in row-major order.
///
/// Returns unsorted eigenpairs; see
/// [`SymmetricEigen::into_sorted_descending`] for the deterministic order.
pub fn eigen_symmetric(matrix: &[f64], n: usize) -> Result<SymmetricEigen> {
    if matrix.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: matrix.len(),
        });
    }
    if n == 0 {
        return Ok(SymmetricEigen {
            values: Vec::new(),
            vectors: Vec::new(),
        });
    }

    let mut a = matrix.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let mut d: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut b = d.clone();
    let mut z = vec![0.0; n];

    for sweep in 0..MAX_SWEEPS {
        let mut off_sq = 0.0;
        let mut sum_abs = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                let x = a[p * n + q];
                off_sq += x * x;
                sum_abs += x.abs();
            }
        }
        if (2.0 * off_sq).sqrt() < OFF_DIAGONAL_TOLERANCE {
            let vectors = (0..n)
                .map(|k| (0..n).map(|j| v[j * n + k]).collect())
                .collect();
            return Ok(SymmetricEigen { values: d, vectors });
        }

        // threshold rotations on the first sweeps, then rotate everything
        let tresh = if sweep < 3 {
            0.2 * sum_abs / (n * n) as f64
        } else {
            0.0
        };

        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let g = 100.0 * apq.abs();
                // once converged this far, a tiny element can be zeroed outright
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    a[p * n + q] = 0.0;
                    continue;
                }
                if apq.abs() <= tresh {
                    continue;
                }

                let diff = d[q] - d[p];
                let t = if diff.abs() + g == diff.abs() {
                    apq / diff
                } else {
                    let theta = 0.5 * diff / apq;
                    let mut t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                    if theta < 0.0 {
                        t = -t;
                    }
                    t
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;
                z[p] -= h;
                z[q] += h;
                d[p] -= h;
                d[q] += h;
                a[p * n + q] = 0.0;

                let rotate = |a: &mut [f64], i1: usize, i2: usize| {
                    let g = a[i1];
                    let h = a[i2];
                    a[i1] = g - s * (h + g * tau);
                    a[i2] = h + s * (g - h * tau);
                };
                for j in 0..p {
                    rotate(&mut a, j * n + p, j * n + q);
                }
                for j in (p + 1)..q {
                    rotate(&mut a, p * n + j, j * n + q);
                }
                for j in (q + 1)..n {
                    rotate(&mut a, p * n + j, q * n + j);
                }
                for j in 0..n {
                    rotate(&mut v, j * n + p, j * n + q);
                }
            }
        }

        for p in 0..n {
            b[p] += z[p];
            d[p] = b[p];
            z[p] = 0.0;
        }
    }

    Err(Error::NoConvergence(MAX_SWEEPS))
}
