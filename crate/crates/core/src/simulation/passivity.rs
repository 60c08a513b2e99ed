//! Shifted passivity of the open-loop plant along simulated trajectories.
//!
//! The supplied energy `int (y - ybar)^T (u - ubar) dt` is integrated as an
//! extra state so storage and supply share one time grid and one error
//! control.

use nalgebra::DVector;

use crate::dynamics::PhStructure;
use crate::energy::{grad_hamiltonian, shifted_hamiltonian};
use crate::error::{Error, Result};
use crate::plant::Plant;
use crate::simulation::integrator::{integrate, IntegratorConfig};
use crate::state::SystemState;

#[derive(Debug, Clone, PartialEq)]
pub struct PassivityRecord {
    pub times: Vec<f64>,
    pub shifted_hamiltonian: Vec<f64>,
    /// Supplied energy accumulated since `t = 0`.
    pub supply: Vec<f64>,
}

impl PassivityRecord {
    /// Largest `Hbar(t_j) - Hbar(t_i) - int_{t_i}^{t_j} y~^T u~ dt` over all
    /// sample pairs `i < j`. Non-positive for a passive trajectory.
    pub fn max_violation(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        let mut min_w = f64::INFINITY;
        for (h, s) in self.shifted_hamiltonian.iter().zip(&self.supply) {
            let w = h - s;
            if min_w.is_finite() {
                worst = worst.max(w - min_w);
            }
            min_w = min_w.min(w);
        }
        worst
    }
}

/// Integrate the plant from `x0` under constant input `u` and record the
/// storage `Hbar` relative to the steady state `(xbar, u_bar)`.
pub fn shifted_passivity(
    plant: &Plant,
    xbar: &SystemState,
    u_bar: &[f64],
    u: &[f64],
    x0: &SystemState,
    config: &IntegratorConfig,
) -> Result<PassivityRecord> {
    let n = plant.n();
    plant.check_state(xbar)?;
    plant.check_state(x0)?;
    for v in [u_bar, u] {
        if v.len() != n {
            return Err(Error::Dimension { what: "input", expected: n, got: v.len() });
        }
    }
    let ph = PhStructure::assemble(plant);
    let layout = plant.layout();
    let dim = layout.dim();
    let y_bar = ph.g().transpose() * grad_hamiltonian(plant, xbar);
    let u_tilde: Vec<f64> = u.iter().zip(u_bar).map(|(a, b)| a - b).collect();
    let rhs = |_: f64, z: &DVector<f64>| {
        let s = SystemState::from_vector(layout, z.rows(0, dim).into_owned()).expect("layout");
        let eval = ph.rhs(plant, &s, u);
        let supply: f64 = (0..n).map(|i| (eval.y[i] - y_bar[i]) * u_tilde[i]).sum();
        DVector::from_iterator(dim + 1, eval.dx.iter().copied().chain(std::iter::once(supply)))
    };
    let z0 = DVector::from_iterator(dim + 1, x0.as_vector().iter().copied().chain(std::iter::once(0.0)));
    let sol = integrate(rhs, &z0, config)?;
    let mut record = PassivityRecord { times: sol.times, shifted_hamiltonian: Vec::new(), supply: Vec::new() };
    for z in &sol.states {
        let s = SystemState::from_vector(layout, z.rows(0, dim).into_owned()).expect("layout");
        record.shifted_hamiltonian.push(shifted_hamiltonian(plant, &s, xbar));
        record.supply.push(z[dim]);
    }
    Ok(record)
}
