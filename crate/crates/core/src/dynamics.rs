//! Open-loop multi-machine dynamics in two forms.
//!
//! [`direct_rhs`] writes out the sixth-order equations node by node with
//! the network currents substituted. [`PhStructure::rhs`] evaluates the same
//! vector field as `xdot = (J - R) grad H + g u`. The two share no code
//! beyond the state layout and are cross-checked in the tests.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::energy::{grad_hamiltonian, DqPair};
use crate::machine::MachineParams;
use crate::plant::Plant;
use crate::state::{Layout, SystemState};

/// Network dq-currents `(I_d, I_q)` entering each generator.
pub fn dq_currents(plant: &Plant, state: &SystemState) -> (Vec<f64>, Vec<f64>) {
    let n = plant.n();
    let b = plant.topology().susceptance();
    let (ed, eq) = (state.ed_dprime(), state.eq_dprime());
    let mut i_d: Vec<f64> = (0..n).map(|i| b[(i, i)] * eq[i]).collect();
    let mut i_q: Vec<f64> = (0..n).map(|i| -b[(i, i)] * ed[i]).collect();
    for (line, &eta) in plant.topology().lines().iter().zip(state.eta()) {
        let b_ik = line.susceptance;
        for (i, k, delta_ik) in [(line.pos, line.neg, eta), (line.neg, line.pos, -eta)] {
            let (s, c) = delta_ik.sin_cos();
            i_d[i] -= b_ik * (ed[k] * s + eq[k] * c);
            i_q[i] -= b_ik * (eq[k] * s - ed[k] * c);
        }
    }
    (i_d, i_q)
}

/// `P_e,i = E''_di I_di + E''_qi I_qi`.
pub fn electrical_power(ed_dprime: &[f64], eq_dprime: &[f64], i_d: &[f64], i_q: &[f64]) -> Vec<f64> {
    (0..ed_dprime.len()).map(|i| ed_dprime[i] * i_d[i] + eq_dprime[i] * i_q[i]).collect()
}

/// Terminal voltage `(V_d, V_q)` from `E'' = V + j X''_d I` with phasors
/// written `q + j d`.
pub fn terminal_voltage(emf: DqPair, i_d: f64, i_q: f64, x_dpp: f64) -> DqPair {
    DqPair::new(emf.d - x_dpp * i_q, emf.q + x_dpp * i_d)
}

/// Right-hand side of the multi-machine model with `delta_ik` read from the
/// edge angles. `p_m` and `p_d` are per-machine.
pub fn direct_rhs(plant: &Plant, state: &SystemState, p_m: &[f64], p_d: &[f64]) -> DVector<f64> {
    let n = plant.n();
    let layout = state.layout();
    let b = plant.topology().susceptance();
    let (ed, eq) = (state.ed_dprime(), state.eq_dprime());

    // Per node: swing-equation coupling, d-axis and q-axis current sums.
    let mut swing = vec![0.0; n];
    let mut sum_d = vec![0.0; n];
    let mut sum_q = vec![0.0; n];
    for (line, &eta) in plant.topology().lines().iter().zip(state.eta()) {
        for (i, k, delta_ik) in [(line.pos, line.neg, eta), (line.neg, line.pos, -eta)] {
            let (s, c) = delta_ik.sin_cos();
            let b_ik = line.susceptance;
            swing[i] += b_ik * ((ed[i] * ed[k] + eq[i] * eq[k]) * s + (ed[i] * eq[k] - eq[i] * ed[k]) * c);
            sum_d[i] += b_ik * (ed[k] * s + eq[k] * c);
            sum_q[i] += b_ik * (ed[k] * c - eq[k] * s);
        }
    }

    let mut dx = DVector::zeros(layout.dim());
    let out = dx.as_mut_slice();
    let omega = plant.omega(state);
    for (i, mp) in plant.machines().iter().enumerate() {
        let d_axis = b[(i, i)] * eq[i] - sum_d[i];
        let q_axis = b[(i, i)] * ed[i] - sum_q[i];
        out[layout.p().start + i] = p_m[i] - p_d[i] + swing[i];
        out[layout.eq_prime().start + i] = (mp.e_f - state.eq_prime()[i] + mp.xd_hat() * d_axis) / mp.t_d_prime;
        out[layout.ed_prime().start + i] = (-state.ed_prime()[i] + mp.xq_hat() * q_axis) / mp.t_q_prime;
        out[layout.eq_dprime().start + i] =
            (state.eq_prime()[i] - eq[i] + mp.xd_hat_prime() * d_axis) / mp.t_d_dprime;
        out[layout.ed_dprime().start + i] =
            (state.ed_prime()[i] - ed[i] + mp.xq_hat_prime() * q_axis) / mp.t_q_dprime;
    }
    for (l, line) in plant.topology().lines().iter().enumerate() {
        out[layout.eta().start + l] = omega[line.pos] - omega[line.neg];
    }
    dx
}

/// Margins of the 2x2 Schur conditions that make the electrical
/// dissipation block positive definite:
/// `4 (X' - X'') T' - (X - X') T''` per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubtransientCheck {
    pub d_margin: f64,
    pub q_margin: f64,
}

impl SubtransientCheck {
    pub fn d_ok(&self) -> bool {
        self.d_margin > 0.0
    }

    pub fn q_ok(&self) -> bool {
        self.q_margin > 0.0
    }

    pub fn ok(&self) -> bool {
        self.d_ok() && self.q_ok()
    }
}

pub fn check_subtransient_condition(params: &MachineParams) -> SubtransientCheck {
    SubtransientCheck {
        d_margin: 4.0 * params.xd_hat_prime() * params.t_d_prime - params.xd_hat() * params.t_d_dprime,
        q_margin: 4.0 * params.xq_hat_prime() * params.t_q_prime - params.xq_hat() * params.t_q_dprime,
    }
}

/// Output of one port-Hamiltonian evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PhEvaluation {
    pub dx: DVector<f64>,
    /// `y = g^T grad H`, i.e. the frequency deviations.
    pub y: DVector<f64>,
}

/// Constant interconnection and damping of the open-loop system.
#[derive(Debug, Clone)]
pub struct PhStructure {
    layout: Layout,
    /// `J - R`
    structure: DMatrix<f64>,
    j: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl PhStructure {
    pub fn assemble(plant: &Plant) -> Self {
        let layout = plant.layout();
        let mut a = DMatrix::zeros(layout.dim(), layout.dim());
        let d = plant.topology().incidence();
        let (rp, re) = (layout.p(), layout.eta());
        a.view_mut((rp.start, re.start), (layout.n, layout.m)).copy_from(&(-d));
        a.view_mut((re.start, rp.start), (layout.m, layout.n)).copy_from(&d.transpose());
        let (rq1, rd1, rq2, rd2) = (layout.eq_prime(), layout.ed_prime(), layout.eq_dprime(), layout.ed_dprime());
        for (i, mp) in plant.machines().iter().enumerate() {
            let kd = mp.xd_hat() / mp.t_d_prime;
            let kq = mp.xq_hat() / mp.t_q_prime;
            a[(rq1.start + i, rq1.start + i)] = -kd;
            a[(rq1.start + i, rq2.start + i)] = -kd;
            a[(rd1.start + i, rd1.start + i)] = -kq;
            a[(rd1.start + i, rd2.start + i)] = -kq;
            a[(rq2.start + i, rq2.start + i)] = -mp.xd_hat_prime() / mp.t_d_dprime;
            a[(rd2.start + i, rd2.start + i)] = -mp.xq_hat_prime() / mp.t_q_dprime;
        }
        let at = a.transpose();
        let j = (&a - &at) * 0.5;
        let r = (&a + &at) * -0.5;
        Self { layout, structure: a, j, r }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// The block matrix `J - R`.
    pub fn structure(&self) -> &DMatrix<f64> {
        &self.structure
    }

    pub fn j(&self) -> &DMatrix<f64> {
        &self.j
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// Input map `g = [I 0 0 0 0 0]^T`.
    pub fn g(&self) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.layout.dim(), self.layout.n);
        for i in 0..self.layout.n {
            g[(i, i)] = 1.0;
        }
        g
    }

    /// `xdot = (J - R) grad + g u`, `y = g^T grad` for a precomputed gradient.
    pub fn rhs_from_gradient(&self, grad: &DVector<f64>, u: &[f64]) -> PhEvaluation {
        let mut dx = &self.structure * grad;
        for (i, ui) in u.iter().enumerate() {
            dx[i] += ui;
        }
        let y = grad.rows(0, self.layout.n).into_owned();
        PhEvaluation { dx, y }
    }

    pub fn rhs(&self, plant: &Plant, state: &SystemState, u: &[f64]) -> PhEvaluation {
        self.rhs_from_gradient(&grad_hamiltonian(plant, state), u)
    }
}

/// `-grad^T R grad` for a dissipation matrix `R`.
pub fn dissipation_rate(dissipation: &DMatrix<f64>, grad: &DVector<f64>) -> f64 {
    -grad.dot(&(dissipation * grad))
}
