//! Small dense linear-algebra helpers shared across the crate.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

pub(crate) fn norm2(v: &ArrayView1<f64>) -> f64 {
    v.dot(v).sqrt()
}

pub(crate) fn all_finite(v: &ArrayView1<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Upper bound on the largest eigenvalue of a symmetric positive definite
/// operator, by power iteration on `apply` with a deterministic start
/// vector 1/sqrt(n). The converged Rayleigh quotient is inflated by
/// (1 + 1e-6); if the iteration does not stagnate within `max_iter`
/// steps the caller's `fallback` bound is returned instead.
pub(crate) fn power_iteration_upper<F>(apply: F, n: usize, max_iter: usize, fallback: f64) -> f64
where
    F: Fn(&ArrayView1<f64>) -> Array1<f64>,
{
    let mut x = Array1::from_elem(n, 1.0 / (n as f64).sqrt());
    let mut prev = f64::NAN;
    for _ in 0..max_iter {
        let y = apply(&x.view());
        let rayleigh = x.dot(&y);
        let ny = norm2(&y.view());
        if ny == 0.0 || !rayleigh.is_finite() {
            break;
        }
        x = y / ny;
        if rayleigh > 0.0 && (rayleigh - prev).abs() <= 1e-10 * rayleigh {
            return rayleigh * (1.0 + 1e-6);
        }
        prev = rayleigh;
    }
    fallback
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
pub(crate) fn cholesky_lower(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!(
            "Cholesky needs a square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "matrix not positive definite (pivot {s:e} at {i})"
                    )));
                }
                l[[i, j]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Ok(l)
}
