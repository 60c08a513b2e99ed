//! Stored energy of the network and its derivatives.
//!
//! All energies are already scaled by the synchronous frequency, so they
//! carry units of power (p.u.). The plant Hamiltonian is
//!
//! ```text
//! H_p = sum_i (H_ed,i + H_eq,i + H_m,i) + sum_l H_l
//! ```
//!
//! where the machine subtransient reactances are counted inside the line
//! terms `H_l`.

use nalgebra::{DMatrix, DVector};

use crate::controller::ControllerConfig;
use crate::machine::MachineParams;
use crate::numeric::fd_jacobian;
use crate::plant::Plant;
use crate::state::{Layout, SystemState};

/// Finite-difference step for Hessians, on per-unit quantities.
pub const FD_STEP: f64 = 1e-6;

/// A `(d, q)` pair of subtransient emf components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqPair {
    pub d: f64,
    pub q: f64,
}

impl DqPair {
    pub fn new(d: f64, q: f64) -> Self {
        Self { d, q }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBreakdown {
    /// d-axis circuit energy per machine (stored in `E'_q`, `E''_q`).
    pub h_ed: Vec<f64>,
    /// q-axis circuit energy per machine (stored in `E'_d`, `E''_d`).
    pub h_eq: Vec<f64>,
    pub h_m: Vec<f64>,
    pub h_line: Vec<f64>,
    /// Plant total.
    pub h_p: f64,
    /// Controller storage `1/2 vartheta^T T^-1 vartheta`, when requested.
    pub h_c: Option<f64>,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.h_p + self.h_c.unwrap_or(0.0)
    }
}

/// Energy in the first two reactances of each axis: `(H_ed, H_eq)`.
pub fn machine_electrical_energy(
    params: &MachineParams,
    eq_prime: f64,
    ed_prime: f64,
    eq_dprime: f64,
    ed_dprime: f64,
) -> (f64, f64) {
    let h_ed = 0.5 * ((eq_prime - params.e_f).powi(2) / params.xd_hat() + (eq_prime - eq_dprime).powi(2) / params.xd_hat_prime());
    let h_eq = 0.5 * (ed_prime.powi(2) / params.xq_hat() + (ed_prime - ed_dprime).powi(2) / params.xq_hat_prime());
    (h_ed, h_eq)
}

/// `H_m,i = p_i^2 / (2 M_i)`.
pub fn kinetic_energy(p: &[f64], inertia: &[f64]) -> Vec<f64> {
    p.iter().zip(inertia).map(|(p, m)| 0.5 * p * p / m).collect()
}

/// Energy of the inductive path between two internal buses, with `eta` the
/// angle of the `+` end (`i`) relative to the `-` end (`k`).
pub fn line_energy(eta: f64, ei: DqPair, ek: DqPair, b_ik: f64) -> f64 {
    let (s, c) = eta.sin_cos();
    -0.5 * b_ik
        * (2.0 * (ei.d * ek.q - ek.d * ei.q) * s - 2.0 * (ei.d * ek.d + ei.q * ek.q) * c
            + ei.d * ei.d
            + ek.d * ek.d
            + ei.q * ei.q
            + ek.q * ek.q)
}

/// Partial derivatives of [`line_energy`]:
/// `(d/d eta, d/dE_di, d/dE_qi, d/dE_dk, d/dE_qk)`.
pub(crate) fn line_energy_gradient(eta: f64, ei: DqPair, ek: DqPair, b_ik: f64) -> [f64; 5] {
    let (s, c) = eta.sin_cos();
    let f = -0.5 * b_ik;
    [
        f * (2.0 * (ei.d * ek.q - ek.d * ei.q) * c + 2.0 * (ei.d * ek.d + ei.q * ek.q) * s),
        f * (2.0 * ek.q * s - 2.0 * ek.d * c + 2.0 * ei.d),
        f * (-2.0 * ek.d * s - 2.0 * ek.q * c + 2.0 * ei.q),
        f * (-2.0 * ei.q * s - 2.0 * ei.d * c + 2.0 * ek.d),
        f * (2.0 * ei.d * s - 2.0 * ei.q * c + 2.0 * ek.q),
    ]
}

fn subtransient(state: &SystemState, i: usize) -> DqPair {
    DqPair::new(state.ed_dprime()[i], state.eq_dprime()[i])
}

/// `1/2 vartheta^T T^-1 vartheta` for diagonal `T`.
pub fn controller_energy(time_constants: &[f64], vartheta: &[f64]) -> f64 {
    vartheta.iter().zip(time_constants).map(|(v, t)| 0.5 * v * v / t).sum()
}

pub fn total_hamiltonian(
    plant: &Plant,
    state: &SystemState,
    controller: Option<(&ControllerConfig, &[f64])>,
) -> EnergyBreakdown {
    let n = plant.n();
    let mut h_ed = Vec::with_capacity(n);
    let mut h_eq = Vec::with_capacity(n);
    for (i, params) in plant.machines().iter().enumerate() {
        let (d, q) = machine_electrical_energy(
            params,
            state.eq_prime()[i],
            state.ed_prime()[i],
            state.eq_dprime()[i],
            state.ed_dprime()[i],
        );
        h_ed.push(d);
        h_eq.push(q);
    }
    let h_m = kinetic_energy(state.p(), &plant.inertia());
    let h_line: Vec<f64> = plant
        .topology()
        .lines()
        .iter()
        .zip(state.eta())
        .map(|(line, &eta)| line_energy(eta, subtransient(state, line.pos), subtransient(state, line.neg), line.susceptance))
        .collect();
    let h_p = h_ed.iter().chain(&h_eq).chain(&h_m).chain(&h_line).sum();
    let h_c = controller.map(|(cfg, vartheta)| controller_energy(cfg.time_constants(), vartheta));
    EnergyBreakdown { h_ed, h_eq, h_m, h_line, h_p, h_c }
}

/// Plant Hamiltonian `H_p` only.
pub fn hamiltonian(plant: &Plant, state: &SystemState) -> f64 {
    total_hamiltonian(plant, state, None).h_p
}

/// Analytic gradient of `H_p`, laid out like the state.
pub fn grad_hamiltonian(plant: &Plant, state: &SystemState) -> DVector<f64> {
    let layout = state.layout();
    let mut g = DVector::zeros(layout.dim());
    let gs = g.as_mut_slice();
    let (rp, re) = (layout.p(), layout.eta());
    let (rq1, rd1, rq2, rd2) = (layout.eq_prime(), layout.ed_prime(), layout.eq_dprime(), layout.ed_dprime());

    for (i, mp) in plant.machines().iter().enumerate() {
        gs[rp.start + i] = state.p()[i] / mp.inertia;
        let (eq1, ed1, eq2, ed2) = (state.eq_prime()[i], state.ed_prime()[i], state.eq_dprime()[i], state.ed_dprime()[i]);
        gs[rq1.start + i] = (eq1 - mp.e_f) / mp.xd_hat() + (eq1 - eq2) / mp.xd_hat_prime();
        gs[rd1.start + i] = ed1 / mp.xq_hat() + (ed1 - ed2) / mp.xq_hat_prime();
        gs[rq2.start + i] = -(eq1 - eq2) / mp.xd_hat_prime();
        gs[rd2.start + i] = -(ed1 - ed2) / mp.xq_hat_prime();
    }
    for (l, line) in plant.topology().lines().iter().enumerate() {
        let [d_eta, d_edi, d_eqi, d_edk, d_eqk] = line_energy_gradient(
            state.eta()[l],
            subtransient(state, line.pos),
            subtransient(state, line.neg),
            line.susceptance,
        );
        gs[re.start + l] = d_eta;
        gs[rd2.start + line.pos] += d_edi;
        gs[rq2.start + line.pos] += d_eqi;
        gs[rd2.start + line.neg] += d_edk;
        gs[rq2.start + line.neg] += d_eqk;
    }
    g
}

/// Gradient block with respect to the internal voltages `(E'_q, E'_d, E''_q, E''_d)`.
pub fn voltage_gradient(layout: Layout, grad: &DVector<f64>) -> Vec<f64> {
    grad.as_slice()[layout.voltages()].to_vec()
}

/// Hessian of `H_p` by central differences of the analytic gradient,
/// symmetrised.
pub fn hessian(plant: &Plant, state: &SystemState) -> DMatrix<f64> {
    let layout = state.layout();
    let raw = fd_jacobian(
        |x| grad_hamiltonian(plant, &SystemState::from_vector(layout, x.clone()).expect("layout")),
        state.as_vector(),
        FD_STEP,
    );
    (&raw + raw.transpose()) * 0.5
}

/// `H(x) - (x - xbar)^T grad H(xbar) - H(xbar)`.
pub fn shifted_hamiltonian(plant: &Plant, state: &SystemState, reference: &SystemState) -> f64 {
    let g_ref = grad_hamiltonian(plant, reference);
    let dx = state.as_vector() - reference.as_vector();
    hamiltonian(plant, state) - dx.dot(&g_ref) - hamiltonian(plant, reference)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::machine::fixtures::machine;
    use crate::network::EdgeSpec;

    /// Two identical machines over one line with `X_l = 2`, so `B_12 = -0.5`.
    pub fn two_machine() -> Plant {
        Plant::new(vec![machine(), machine()], vec![EdgeSpec::new(1, 2, 1.5)]).unwrap()
    }

    /// Aligned, unloaded equilibrium: `E'_q = E''_q = E_f`, no current.
    pub fn aligned_equilibrium(plant: &Plant) -> SystemState {
        let n = plant.n();
        let ef: Vec<f64> = plant.machines().iter().map(|m| m.e_f).collect();
        plant.state_from_angles(&vec![0.0; n], &vec![0.0; n], &ef, &vec![0.0; n], &ef, &vec![0.0; n]).unwrap()
    }
}
