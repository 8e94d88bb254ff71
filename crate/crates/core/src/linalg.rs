//! Small dense and tridiagonal solvers.

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

/// Pivots smaller than this in magnitude are treated as singular.
pub const PIVOT_TOL: Real = 1e-12;

/// Solves `a · x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Tensor, b: &[Real]) -> Result<Vec<Real>> {
    let n = a.rows();
    if a.shape().len() != 2 || a.cols() != n || b.len() != n {
        return Err(Error::shape("solve", a.shape(), &[b.len()]));
    }
    let mut m = a.data().to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .expect("non-empty range");
        let pivot = m[pivot_row * n + col];
        if pivot.abs() < PIVOT_TOL {
            return Err(Error::Numeric(format!(
                "singular system: pivot {pivot:e} in column {col}"
            )));
        }
        if pivot_row != col {
            for k in 0..n {
                m.swap(col * n + k, pivot_row * n + k);
            }
            x.swap(col, pivot_row);
        }
        for row in col + 1..n {
            let factor = m[row * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= factor * m[col * n + k];
            }
            x[row] -= factor * x[col];
        }
    }
    for row in (0..n).rev() {
        let mut acc = x[row];
        for k in row + 1..n {
            acc -= m[row * n + k] * x[k];
        }
        x[row] = acc / m[row * n + row];
    }
    Ok(x)
}

/// Max-norm of `a · x − b`.
pub fn residual(a: &Tensor, x: &[Real], b: &[Real]) -> Real {
    let n = a.cols();
    b.iter()
        .enumerate()
        .map(|(i, &bi)| {
            let ax: Real = (0..n).map(|k| a.get(i, k) * x[k]).sum();
            (ax - bi).abs()
        })
        .fold(0.0, Real::max)
}

/// Thomas algorithm for a tridiagonal system. `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[Real], diag: &[Real], upper: &[Real], rhs: &[Real]) -> Vec<Real> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}
