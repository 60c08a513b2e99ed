//! Newton iteration with a finite-difference Jacobian and step halving.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::fd_jacobian;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Converged when `||r||_inf < tol`.
    pub tol: f64,
    pub max_iterations: usize,
    pub fd_step: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iterations: 50, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    pub x: DVector<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Residual norm before each iteration, then the final one.
    pub trace: Vec<f64>,
}

/// Solve `residual(x) = 0` for a square system.
pub fn newton<F>(residual: F, guess: &DVector<f64>, config: &NewtonConfig) -> Result<NewtonSolution>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let mut x = guess.clone();
    let mut r = residual(&x);
    if r.len() != x.len() {
        return Err(Error::Dimension { what: "Newton residual", expected: x.len(), got: r.len() });
    }
    let mut norm = r.amax();
    let mut trace = vec![norm];
    let mut iterations = 0;
    while !(norm < config.tol) {
        if iterations >= config.max_iterations || !norm.is_finite() {
            return Err(Error::NewtonDiverged { iterations, residual: norm, trace });
        }
        let jac = fd_jacobian(&residual, &x, config.fd_step);
        let step = jac.lu().solve(&r).ok_or(Error::SingularJacobian { iteration: iterations })?;
        if step.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian { iteration: iterations });
        }
        let mut alpha = 1.0;
        let (mut x_try, mut r_try);
        loop {
            x_try = &x - &step * alpha;
            r_try = residual(&x_try);
            let n_try = r_try.amax();
            if n_try < norm || alpha < 1.0 / 1024.0 {
                break;
            }
            alpha *= 0.5;
        }
        x = x_try;
        r = r_try;
        norm = r.amax();
        iterations += 1;
        trace.push(norm);
    }
    Ok(NewtonSolution { x, residual_norm: norm, iterations, trace })
}
