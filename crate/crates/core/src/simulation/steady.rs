//! Steady states of the open- and closed-loop systems.
//!
//! Newton runs in reduced coordinates `(p, delta_2..n, E, [vartheta])` with
//! `delta_1 = 0`, so edge angles always stay in the range of `D^T` and the
//! global rotation is removed. The `eta` rows of the vector field are
//! replaced by the equivalent condition `omega_i = omega_1`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::controller::ClosedLoop;
use crate::dynamics::PhStructure;
use crate::energy::hessian;
use crate::error::{Error, Result};
use crate::numeric::min_symmetric_eigenvalue;
use crate::plant::Plant;
use crate::simulation::newton::{newton, NewtonConfig};
use crate::state::SystemState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateResult {
    /// Full state: plant state, followed by `vartheta` in closed loop.
    pub x: Vec<f64>,
    pub residual_norm: f64,
    pub hessian_min_eigenvalue: f64,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

impl SteadyStateResult {
    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x)
    }

    pub fn hessian_positive_definite(&self) -> bool {
        self.hessian_min_eigenvalue > 0.0
    }
}

/// Plant state to `(p, delta_2..n, E)`.
pub fn plant_to_reduced(plant: &Plant, state: &SystemState) -> Vec<f64> {
    let delta = plant.topology().relative_angles(state.eta());
    let layout = plant.layout();
    let mut z = state.p().to_vec();
    z.extend_from_slice(&delta[1..]);
    z.extend_from_slice(&state.as_vector().as_slice()[layout.voltages()]);
    z
}

/// Inverse of [`plant_to_reduced`] for the leading `5n - 1` entries of `z`.
pub fn plant_from_reduced(plant: &Plant, z: &[f64]) -> SystemState {
    let n = plant.n();
    let mut delta = vec![0.0; n];
    delta[1..].copy_from_slice(&z[n..2 * n - 1]);
    let e = &z[2 * n - 1..6 * n - 1];
    plant
        .state_from_angles(&z[..n], &delta, &e[..n], &e[n..2 * n], &e[2 * n..3 * n], &e[3 * n..])
        .expect("reduced layout")
}

fn closed_to_reduced(cl: &ClosedLoop, x: &DVector<f64>) -> DVector<f64> {
    let (state, vartheta) = cl.split(x);
    let mut z = plant_to_reduced(cl.plant(), &state);
    z.extend_from_slice(&vartheta);
    DVector::from_vec(z)
}

fn closed_from_reduced(cl: &ClosedLoop, z: &DVector<f64>) -> DVector<f64> {
    let n = cl.plant().n();
    let state = plant_from_reduced(cl.plant(), z.as_slice());
    cl.stack(&state, &z.as_slice()[6 * n - 1..])
}

fn closed_residual(cl: &ClosedLoop, z: &DVector<f64>) -> DVector<f64> {
    let n = cl.plant().n();
    let layout = cl.plant_layout();
    let x = closed_from_reduced(cl, z);
    let f = cl.rhs(&x);
    let inertia = cl.plant().inertia();
    let w1 = x[0] / inertia[0];
    let mut r: Vec<f64> = f.as_slice()[..n].to_vec();
    r.extend_from_slice(&f.as_slice()[layout.voltages().start..]);
    r.extend((1..n).map(|i| x[i] / inertia[i] - w1));
    DVector::from_vec(r)
}

/// Closed-loop Hessian `blockdiag(hess H_p, T^-1)` at `x`.
pub fn closed_loop_hessian(cl: &ClosedLoop, x: &DVector<f64>) -> DMatrix<f64> {
    let (state, _) = cl.split(x);
    let hp = hessian(cl.plant(), &state);
    let np = hp.nrows();
    let mut h = DMatrix::zeros(cl.dim(), cl.dim());
    h.view_mut((0, 0), (np, np)).copy_from(&hp);
    for (i, t) in cl.config().time_constants().iter().enumerate() {
        h[(np + i, np + i)] = 1.0 / t;
    }
    h
}

pub fn find_closed_loop_steady_state(
    cl: &ClosedLoop,
    guess: &DVector<f64>,
    config: &NewtonConfig,
) -> Result<SteadyStateResult> {
    cl.check_dim(guess)?;
    let z0 = closed_to_reduced(cl, guess);
    let sol = newton(|z| closed_residual(cl, z), &z0, config)?;
    let x = closed_from_reduced(cl, &sol.x);
    let residual_norm = cl.rhs(&x).amax();
    if !(residual_norm < config.tol) {
        return Err(Error::NewtonDiverged { iterations: sol.iterations, residual: residual_norm, trace: sol.trace });
    }
    let hessian_min_eigenvalue = min_symmetric_eigenvalue(&closed_loop_hessian(cl, &x));
    Ok(SteadyStateResult {
        x: x.iter().copied().collect(),
        residual_norm,
        hessian_min_eigenvalue,
        iterations: sol.iterations,
        trace: sol.trace,
    })
}

/// Steady state of the plant under a constant input `u` with `1^T u = 0`
/// (at rest, `1^T u = sum P_e = 0`).
pub fn find_open_loop_steady_state(
    plant: &Plant,
    u: &[f64],
    guess: &SystemState,
    config: &NewtonConfig,
) -> Result<SteadyStateResult> {
    let n = plant.n();
    plant.check_state(guess)?;
    if u.len() != n {
        return Err(Error::Dimension { what: "input", expected: n, got: u.len() });
    }
    let total: f64 = u.iter().sum();
    let scale = u.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if total.abs() > 1e-12 * scale * n as f64 {
        return Err(Error::InvalidParameter(format!(
            "open-loop steady state needs inputs summing to zero, got {total:e}"
        )));
    }
    let ph = PhStructure::assemble(plant);
    let inertia = plant.inertia();
    let residual = |z: &DVector<f64>| {
        let s = plant_from_reduced(plant, z.as_slice());
        let f = ph.rhs(plant, &s, u).dx;
        let mut r: Vec<f64> = f.as_slice()[1..n].to_vec();
        r.extend_from_slice(&f.as_slice()[plant.layout().voltages()]);
        r.extend(s.p().iter().zip(&inertia).map(|(p, m)| p / m));
        DVector::from_vec(r)
    };
    let z0 = DVector::from_vec(plant_to_reduced(plant, guess));
    let sol = newton(residual, &z0, config)?;
    let s = plant_from_reduced(plant, sol.x.as_slice());
    let residual_norm = ph.rhs(plant, &s, u).dx.amax();
    if !(residual_norm < config.tol) {
        return Err(Error::NewtonDiverged { iterations: sol.iterations, residual: residual_norm, trace: sol.trace });
    }
    let hessian_min_eigenvalue = min_symmetric_eigenvalue(&hessian(plant, &s));
    Ok(SteadyStateResult {
        x: s.as_vector().iter().copied().collect(),
        residual_norm,
        hessian_min_eigenvalue,
        iterations: sol.iterations,
        trace: sol.trace,
    })
}

/// Rotor angles (`delta_1 = 0`) from a linearised power flow: solve
/// `sum_k w_ik (delta_i - delta_k) = P_i` with `w_ik = E_fi E_fk |B_ik|`.
pub fn dc_power_flow(plant: &Plant, injections: &[f64]) -> Vec<f64> {
    let n = plant.n();
    let b = plant.topology().susceptance();
    let ef: Vec<f64> = plant.machines().iter().map(|m| m.e_f).collect();
    let mut lap = DMatrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            if i != k && b[(i, k)] != 0.0 {
                let w = ef[i] * ef[k] * b[(i, k)].abs();
                lap[(i, k)] -= w;
                lap[(i, i)] += w;
            }
        }
    }
    let mut delta = vec![0.0; n];
    if n > 1 {
        let reduced = lap.view((1, 1), (n - 1, n - 1)).into_owned();
        let rhs = DVector::from_column_slice(&injections[1..]);
        if let Some(sol) = reduced.lu().solve(&rhs) {
            delta[1..].copy_from_slice(sol.as_slice());
        }
    }
    delta
}

/// Flat start: `omega = 0`, angles from [`dc_power_flow`],
/// `E'_q = E''_q = E_f`, `E'_d = E''_d = 0`.
pub fn flat_plant_state(plant: &Plant, injections: &[f64]) -> SystemState {
    let n = plant.n();
    let delta = dc_power_flow(plant, injections);
    let ef: Vec<f64> = plant.machines().iter().map(|m| m.e_f).collect();
    let zeros = vec![0.0; n];
    plant.state_from_angles(&zeros, &delta, &ef, &zeros, &ef, &zeros).expect("dimensions match")
}

/// Closed-loop flat start with `vartheta = 0`, angles from the optimal
/// dispatch injections.
pub fn flat_start(cl: &ClosedLoop) -> Result<DVector<f64>> {
    let dispatch = cl.dispatch()?;
    let inj: Vec<f64> = dispatch.p_m.iter().zip(cl.demand()).map(|(m, d)| m - d).collect();
    let state = flat_plant_state(cl.plant(), &inj);
    Ok(cl.stack(&state, &vec![0.0; cl.plant().n()]))
}

/// Newton guess: flat start with `theta` already at the optimal price.
pub fn steady_state_guess(cl: &ClosedLoop) -> Result<DVector<f64>> {
    let lambda = cl.dispatch()?.lambda;
    let mut x = flat_start(cl)?;
    for (i, t) in cl.vartheta_range().zip(cl.config().time_constants()) {
        x[i] = t * lambda;
    }
    Ok(x)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use crate::controller::{ClosedLoop, ControllerConfig};
    use crate::energy::fixtures::two_machine;
    use crate::network::{build_comm_laplacian, CommEdge};
    use nalgebra::DMatrix;

    pub fn two_machine_loop(p_d: [f64; 2]) -> ClosedLoop {
        let comm = build_comm_laplacian(2, &[CommEdge::new(1, 2, 1.0)]).unwrap();
        let q = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        let cfg = ControllerConfig::new(q, vec![1.0; 2], vec![1.0; 2], comm).unwrap();
        ClosedLoop::new(two_machine(), cfg, p_d.to_vec()).unwrap()
    }
}
