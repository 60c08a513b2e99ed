//! Small dense numerical helpers shared across modules.

use nalgebra::{DMatrix, DVector};

/// Central finite-difference Jacobian of `f` at `x` with step `h`.
pub fn fd_jacobian<F>(f: F, x: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x.len();
    let mut cols = Vec::with_capacity(n);
    let mut xp = x.clone();
    for j in 0..n {
        let orig = xp[j];
        xp[j] = orig + h;
        let fp = f(&xp);
        xp[j] = orig - h;
        let fm = f(&xp);
        xp[j] = orig;
        cols.push((fp - fm) / (2.0 * h));
    }
    let rows = cols.first().map_or(0, |c| c.len());
    DMatrix::from_fn(rows, n, |i, j| cols[j][i])
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_symmetric_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}
