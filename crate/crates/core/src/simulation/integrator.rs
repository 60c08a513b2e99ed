//! Explicit Runge-Kutta integrators: classical RK4 at a fixed step and the
//! Dormand-Prince 5(4) pair with step-size control.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Rk4 { dt: f64 },
    Rk45 { rtol: f64, atol: f64 },
}

impl Default for Method {
    fn default() -> Self {
        Method::Rk45 { rtol: 1e-8, atol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    #[serde(flatten)]
    pub method: Method,
    pub t_end: f64,
    /// Record every `record_stride`-th step (the final state is always
    /// recorded).
    pub record_stride: usize,
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self.method {
            Method::Rk4 { dt } if !(dt > 0.0 && dt.is_finite()) => return bad(format!("dt must be positive, got {dt}")),
            Method::Rk45 { rtol, atol } if !(rtol > 0.0 && atol > 0.0) => {
                return bad(format!("rtol and atol must be positive, got {rtol}, {atol}"))
            }
            _ => {}
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.record_stride == 0 {
            return bad("record_stride must be at least 1".into());
        }
        Ok(())
    }
}

/// Recorded samples of an integration run.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Solution {
    pub fn last(&self) -> &DVector<f64> {
        self.states.last().expect("solution holds at least the initial state")
    }
}

pub fn integrate<F>(rhs: F, x0: &DVector<f64>, config: &IntegratorConfig) -> Result<Solution>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    config.validate()?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t: 0.0 });
    }
    match config.method {
        Method::Rk4 { dt } => rk4(rhs, x0, dt, config.t_end, config.record_stride),
        Method::Rk45 { rtol, atol } => dopri5(rhs, x0, rtol, atol, config.t_end, config.record_stride),
    }
}

fn rk4<F>(mut f: F, x0: &DVector<f64>, dt: f64, t_end: f64, stride: usize) -> Result<Solution>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let steps = ((t_end / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut sol = Solution { times: vec![0.0], states: vec![x0.clone()], accepted_steps: 0, rejected_steps: 0 };
    let mut x = x0.clone();
    for i in 0..steps {
        let t = i as f64 * dt;
        let h = if i + 1 == steps { t_end - t } else { dt };
        let k1 = f(t, &x);
        let k2 = f(t + 0.5 * h, &(&x + &k1 * (0.5 * h)));
        let k3 = f(t + 0.5 * h, &(&x + &k2 * (0.5 * h)));
        let k4 = f(t + h, &(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let t_next = if i + 1 == steps { t_end } else { (i + 1) as f64 * dt };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { t: t_next });
        }
        sol.accepted_steps += 1;
        if (i + 1) % stride == 0 || i + 1 == steps {
            sol.times.push(t_next);
            sol.states.push(x.clone());
        }
    }
    Ok(sol)
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn error_norm(x: &DVector<f64>, x_new: &DVector<f64>, err: &DVector<f64>, rtol: f64, atol: f64) -> f64 {
    let sum: f64 = (0..x.len())
        .map(|i| {
            let sc = atol + rtol * x[i].abs().max(x_new[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / x.len().max(1) as f64).sqrt()
}

fn dopri5<F>(mut f: F, x0: &DVector<f64>, rtol: f64, atol: f64, t_end: f64, stride: usize) -> Result<Solution>
where
    F: FnMut(f64, &DVector<f64>) -> DVector<f64>,
{
    let mut sol = Solution { times: vec![0.0], states: vec![x0.clone()], accepted_steps: 0, rejected_steps: 0 };
    let mut t = 0.0;
    let mut x = x0.clone();
    let mut k1 = f(t, &x);

    // Initial step from the derivative scale.
    let scale = |v: &DVector<f64>, x: &DVector<f64>| {
        let s: f64 = v.iter().zip(x.iter()).map(|(a, b)| (a / (atol + rtol * b.abs())).powi(2)).sum();
        (s / x.len().max(1) as f64).sqrt()
    };
    let d0 = scale(&x, &x);
    let d1 = scale(&k1, &x);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(t_end);

    let mut k: Vec<DVector<f64>> = vec![DVector::zeros(x.len()); 7];
    while t < t_end {
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::StepUnderflow { t, h });
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        k[0] = k1.clone();
        for s in 1..7 {
            let mut xs = x.clone();
            for (j, kj) in k.iter().enumerate().take(s) {
                if A[s][j] != 0.0 {
                    xs.axpy(h * A[s][j], kj, 1.0);
                }
            }
            k[s] = f(t + C[s] * h, &xs);
        }
        let mut x_new = x.clone();
        let mut err = DVector::zeros(x.len());
        for s in 0..7 {
            if B5[s] != 0.0 {
                x_new.axpy(h * B5[s], &k[s], 1.0);
            }
            err.axpy(h * (B5[s] - B4[s]), &k[s], 1.0);
        }
        let norm = error_norm(&x, &x_new, &err, rtol, atol);
        if !norm.is_finite() {
            h *= 0.1;
            sol.rejected_steps += 1;
            continue;
        }
        if norm <= 1.0 {
            t = if last { t_end } else { t + h };
            x = x_new;
            k1 = k[6].clone();
            sol.accepted_steps += 1;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { t });
            }
            if sol.accepted_steps.is_multiple_of(stride) || t >= t_end {
                sol.times.push(t);
                sol.states.push(x.clone());
            }
            let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            sol.rejected_steps += 1;
            h *= (0.9 * norm.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    Ok(sol)
}
