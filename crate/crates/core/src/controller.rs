//! Distributed consensus controller and optimal dispatch.
//!
//! ```text
//! vartheta_dot = -L_c T^-1 vartheta - Q^-1 omega
//! P_m          =  Q^-1 T^-1 vartheta - K omega
//! ```
//!
//! Interconnected with the plant this gives one port-Hamiltonian system on
//! `(x_p, vartheta)` with Hamiltonian `H_p + 1/2 vartheta^T T^-1 vartheta`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::PhStructure;
use crate::energy::{controller_energy, grad_hamiltonian, hamiltonian};
use crate::error::{Error, Result};
use crate::network::CommGraph;
use crate::numeric::inf_norm;
use crate::plant::Plant;
use crate::state::{Layout, SystemState};

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct ControllerConfig {
    q: DMatrix<f64>,
    q_inv: DMatrix<f64>,
    t: Vec<f64>,
    k: Vec<f64>,
    comm: CommGraph,
}

fn cholesky_spd(q: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if !q.is_square() || q.nrows() == 0 {
        return Err(Error::CostNotPositiveDefinite);
    }
    let scale = q.amax().max(1.0);
    if (q - q.transpose()).amax() > SYMMETRY_TOL * scale {
        return Err(Error::CostNotPositiveDefinite);
    }
    let sym = (q + q.transpose()) * 0.5;
    sym.cholesky().ok_or(Error::CostNotPositiveDefinite)
}

impl ControllerConfig {
    /// `t` and `k` are the diagonals of `T` and `K`.
    pub fn new(q: DMatrix<f64>, t: Vec<f64>, k: Vec<f64>, comm: CommGraph) -> Result<Self> {
        let n = q.nrows();
        for (what, len) in [("T", t.len()), ("K", k.len()), ("communication graph", comm.n())] {
            if len != n {
                return Err(Error::Dimension { what, expected: n, got: len });
            }
        }
        for (i, (&ti, &ki)) in t.iter().zip(&k).enumerate() {
            if !(ti > 0.0 && ti.is_finite()) {
                return Err(Error::InvalidParameter(format!("controller {}: T must be positive, got {ti}", i + 1)));
            }
            if !(ki > 0.0 && ki.is_finite()) {
                return Err(Error::InvalidParameter(format!("controller {}: K must be positive, got {ki}", i + 1)));
            }
        }
        let q_inv = cholesky_spd(&q)?.inverse();
        Ok(Self { q, q_inv, t, k, comm })
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn q_inv(&self) -> &DMatrix<f64> {
        &self.q_inv
    }

    pub fn time_constants(&self) -> &[f64] {
        &self.t
    }

    pub fn droop(&self) -> &[f64] {
        &self.k
    }

    pub fn comm(&self) -> &CommGraph {
        &self.comm
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        self.comm.laplacian()
    }

    /// `theta = T^-1 vartheta`
    pub fn theta(&self, vartheta: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.n(), vartheta.iter().zip(&self.t).map(|(v, t)| v / t))
    }
}

/// Minimiser of `1/2 P^T Q P` subject to `1^T P = 1^T P_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub p_m: Vec<f64>,
    pub lambda: f64,
}

/// `lambda* = 1^T P_d / 1^T Q^-1 1`, `P_m* = Q^-1 1 lambda*`.
pub fn optimal_dispatch(q: &DMatrix<f64>, p_d: &[f64]) -> Result<DispatchSolution> {
    if p_d.len() != q.nrows() {
        return Err(Error::Dimension { what: "demand", expected: q.nrows(), got: p_d.len() });
    }
    let chol = cholesky_spd(q)?;
    let q_inv_one = chol.solve(&DVector::from_element(p_d.len(), 1.0));
    let lambda = p_d.iter().sum::<f64>() / q_inv_one.sum();
    Ok(DispatchSolution { p_m: (q_inv_one * lambda).iter().copied().collect(), lambda })
}

/// `P_m = Q^-1 T^-1 vartheta - K omega`
pub fn controller_output(cfg: &ControllerConfig, vartheta: &[f64], omega: &[f64]) -> DVector<f64> {
    let mut p_m = cfg.q_inv() * cfg.theta(vartheta);
    for (i, (k, w)) in cfg.droop().iter().zip(omega).enumerate() {
        p_m[i] -= k * w;
    }
    p_m
}

/// `vartheta_dot = -L_c T^-1 vartheta - Q^-1 omega`
pub fn controller_rhs(cfg: &ControllerConfig, vartheta: &[f64], omega: &[f64]) -> DVector<f64> {
    let omega = DVector::from_column_slice(omega);
    -(cfg.laplacian() * cfg.theta(vartheta)) - cfg.q_inv() * omega
}

/// Plant, controller and constant demand as one system on `(x_p, vartheta)`.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    plant: Plant,
    config: ControllerConfig,
    p_d: Vec<f64>,
    open_loop: PhStructure,
    /// `[J - R - R_K, G^T; -G, -L_c]`
    structure: DMatrix<f64>,
    /// `blockdiag(R + R_K, L_c)`
    dissipation: DMatrix<f64>,
}

impl ClosedLoop {
    pub fn new(plant: Plant, config: ControllerConfig, p_d: Vec<f64>) -> Result<Self> {
        let n = plant.n();
        if config.n() != n {
            return Err(Error::Dimension { what: "controller", expected: n, got: config.n() });
        }
        if p_d.len() != n {
            return Err(Error::Dimension { what: "demand", expected: n, got: p_d.len() });
        }
        let open_loop = PhStructure::assemble(&plant);
        let np = plant.layout().dim();
        let dim = np + n;
        let mut structure = DMatrix::zeros(dim, dim);
        structure.view_mut((0, 0), (np, np)).copy_from(open_loop.structure());
        for i in 0..n {
            structure[(i, i)] -= config.droop()[i];
        }
        // G = [Q^-1 0 ... 0] acts on the momentum block.
        structure.view_mut((0, np), (n, n)).copy_from(&config.q_inv().transpose());
        structure.view_mut((np, 0), (n, n)).copy_from(&(-config.q_inv()));
        structure.view_mut((np, np), (n, n)).copy_from(&(-config.laplacian()));
        let dissipation = (&structure + structure.transpose()) * -0.5;
        Ok(Self { plant, config, p_d, open_loop, structure, dissipation })
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn demand(&self) -> &[f64] {
        &self.p_d
    }

    pub fn open_loop(&self) -> &PhStructure {
        &self.open_loop
    }

    pub fn structure(&self) -> &DMatrix<f64> {
        &self.structure
    }

    pub fn dissipation(&self) -> &DMatrix<f64> {
        &self.dissipation
    }

    pub fn plant_layout(&self) -> Layout {
        self.plant.layout()
    }

    pub fn dim(&self) -> usize {
        self.plant_layout().dim() + self.plant.n()
    }

    pub fn vartheta_range(&self) -> std::ops::Range<usize> {
        let np = self.plant_layout().dim();
        np..np + self.plant.n()
    }

    /// Split a stacked closed-loop vector into plant state and `vartheta`.
    pub fn split(&self, x: &DVector<f64>) -> (SystemState, Vec<f64>) {
        let np = self.plant_layout().dim();
        let state = SystemState::from_vector(self.plant_layout(), x.rows(0, np).into_owned()).expect("closed-loop dimension");
        (state, x.as_slice()[np..].to_vec())
    }

    pub fn stack(&self, state: &SystemState, vartheta: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.dim(), state.as_vector().iter().chain(vartheta).copied())
    }

    pub fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { what: "closed-loop state", expected: self.dim(), got: x.len() });
        }
        Ok(())
    }

    pub fn hamiltonian(&self, x: &DVector<f64>) -> f64 {
        let (state, vartheta) = self.split(x);
        hamiltonian(&self.plant, &state) + controller_energy(self.config.time_constants(), &vartheta)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let (state, vartheta) = self.split(x);
        let gp = grad_hamiltonian(&self.plant, &state);
        let theta = self.config.theta(&vartheta);
        DVector::from_iterator(self.dim(), gp.iter().chain(theta.iter()).copied())
    }

    /// Closed-loop vector field from the block structure.
    pub fn rhs(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut dx = &self.structure * self.gradient(x);
        for (i, d) in self.p_d.iter().enumerate() {
            dx[i] -= d;
        }
        dx
    }

    /// Same vector field assembled from the open-loop plant driven by the
    /// controller output, stacked with the controller dynamics.
    pub fn composed_rhs(&self, x: &DVector<f64>) -> DVector<f64> {
        let (state, vartheta) = self.split(x);
        let omega = self.plant.omega(&state);
        let p_m = controller_output(&self.config, &vartheta, &omega);
        let u: Vec<f64> = p_m.iter().zip(&self.p_d).map(|(m, d)| m - d).collect();
        let plant_dx = self.open_loop.rhs(&self.plant, &state, &u).dx;
        let ctrl_dx = controller_rhs(&self.config, &vartheta, &omega);
        DVector::from_iterator(self.dim(), plant_dx.iter().chain(ctrl_dx.iter()).copied())
    }

    /// Mechanical power commanded at `x`.
    pub fn mechanical_power(&self, x: &DVector<f64>) -> DVector<f64> {
        let (state, vartheta) = self.split(x);
        controller_output(&self.config, &vartheta, &self.plant.omega(&state))
    }

    pub fn shifted_hamiltonian(&self, x: &DVector<f64>, reference: &DVector<f64>) -> f64 {
        let g_ref = self.gradient(reference);
        self.hamiltonian(x) - (x - reference).dot(&g_ref) - self.hamiltonian(reference)
    }

    /// `-(grad Hbar)^T blockdiag(R + R_K, L_c) grad Hbar`
    pub fn dissipation_rate(&self, x: &DVector<f64>, reference: &DVector<f64>) -> f64 {
        let g = self.gradient(x) - self.gradient(reference);
        crate::dynamics::dissipation_rate(&self.dissipation, &g)
    }

    pub fn dispatch(&self) -> Result<DispatchSolution> {
        optimal_dispatch(self.config.q(), &self.p_d)
    }

    /// Check the conditions characterising the optimal steady-state set.
    pub fn verify_steady_state(&self, x: &DVector<f64>, tol: f64) -> Result<SteadyStateReport> {
        self.check_dim(x)?;
        let dispatch = self.dispatch()?;
        let (state, vartheta) = self.split(x);
        let omega = self.plant.omega(&state);
        let theta = self.config.theta(&vartheta);
        let p_m = controller_output(&self.config, &vartheta, &omega);
        let grad = grad_hamiltonian(&self.plant, &state);
        let layout = self.plant_layout();

        let rhs_inf = self.rhs(x).amax();
        let omega_inf = inf_norm(&omega);
        let theta_err = theta.iter().map(|t| (t - dispatch.lambda).abs()).fold(0.0, f64::max);
        let dispatch_err = p_m.iter().zip(&dispatch.p_m).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let grad_e = inf_norm(&grad.as_slice()[layout.voltages()]);
        let check = |name: &str, value: f64| Check { name: name.to_string(), value, tolerance: tol, passed: value < tol };
        Ok(SteadyStateReport {
            lambda: dispatch.lambda,
            checks: vec![
                check("rhs_inf", rhs_inf),
                check("omega_inf", omega_inf),
                check("theta_consensus_error", theta_err),
                check("dispatch_error_inf", dispatch_err),
                check("grad_voltage_inf", grad_e),
            ],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateReport {
    pub lambda: f64,
    pub checks: Vec<Check>,
}

impl SteadyStateReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::fixtures::{aligned_equilibrium, two_machine};
    use crate::network::{build_comm_laplacian, CommEdge};
    use crate::random::{random_plant, random_state};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn k2() -> CommGraph {
        build_comm_laplacian(2, &[CommEdge::new(1, 2, 1.0)]).unwrap()
    }

    fn identity_config(n: usize, k: f64) -> ControllerConfig {
        let edges: Vec<_> = (1..n).map(|i| CommEdge::new(i, i + 1, 1.0)).collect();
        let comm = build_comm_laplacian(n, &edges).unwrap();
        ControllerConfig::new(DMatrix::identity(n, n), vec![1.0; n], vec![k; n], comm).unwrap()
    }

    #[test]
    fn dispatch_hand_value() {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let sol = optimal_dispatch(&q, &[1.0, 2.0]).unwrap();
        assert_relative_eq!(sol.lambda, 2.0, max_relative = 1e-15);
        assert_relative_eq!(sol.p_m[0], 2.0, max_relative = 1e-15);
        assert_relative_eq!(sol.p_m[1], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn dispatch_uniform_split_and_zero_demand() {
        let sol = optimal_dispatch(&DMatrix::identity(3, 3), &[0.3, 1.2, 0.6]).unwrap();
        for p in &sol.p_m {
            assert_relative_eq!(*p, 0.7, max_relative = 1e-14);
        }
        let sol = optimal_dispatch(&DMatrix::identity(3, 3), &[0.0; 3]).unwrap();
        assert_eq!(sol.lambda, 0.0);
        assert!(sol.p_m.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn dispatch_single_machine_carries_load() {
        let sol = optimal_dispatch(&DMatrix::from_element(1, 1, 4.0), &[0.8]).unwrap();
        assert_relative_eq!(sol.p_m[0], 0.8, max_relative = 1e-15);
    }

    #[test]
    fn dispatch_rejects_indefinite_and_asymmetric() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(optimal_dispatch(&bad, &[1.0, 1.0]), Err(Error::CostNotPositiveDefinite));
        let asym = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.0, 2.0]);
        assert_eq!(optimal_dispatch(&asym, &[1.0, 1.0]), Err(Error::CostNotPositiveDefinite));
        assert!(ControllerConfig::new(bad, vec![1.0; 2], vec![1.0; 2], k2()).is_err());
    }

    #[test]
    fn config_rejects_nonpositive_gains() {
        assert!(ControllerConfig::new(DMatrix::identity(2, 2), vec![1.0, 0.0], vec![1.0; 2], k2()).is_err());
        assert!(ControllerConfig::new(DMatrix::identity(2, 2), vec![1.0; 2], vec![-1.0, 1.0], k2()).is_err());
    }

    #[test]
    fn output_hand_values() {
        let comm = build_comm_laplacian(1, &[]).unwrap();
        let cfg = ControllerConfig::new(DMatrix::identity(1, 1), vec![1.0], vec![2.0], comm).unwrap();
        assert_relative_eq!(controller_output(&cfg, &[3.0], &[0.1])[0], 2.8, max_relative = 1e-15);
        assert_eq!(controller_output(&cfg, &[0.0], &[0.0])[0], 0.0);

        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 4.0]));
        let cfg = ControllerConfig::new(q, vec![0.5, 2.0], vec![1.0; 2], k2()).unwrap();
        let p = controller_output(&cfg, &[1.0, 1.0], &[0.0, 0.0]);
        // theta = (2, 0.5), Q^-1 theta = (1, 0.125)
        assert_relative_eq!(p[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(p[1], 0.125, max_relative = 1e-15);
    }

    #[test]
    fn controller_rhs_hand_values() {
        let cfg = identity_config(2, 1.0);
        let d = controller_rhs(&cfg, &[1.0, 2.0], &[0.0, 0.0]);
        assert_eq!(d.as_slice(), &[1.0, -1.0]);
        let d = controller_rhs(&cfg, &[1.5, 1.5], &[0.0, 0.0]);
        assert_eq!(d.as_slice(), &[0.0, 0.0]);
        let d = controller_rhs(&cfg, &[1.5, 1.5], &[0.1, -0.1]);
        assert_relative_eq!(d[0], -0.1);
        assert_relative_eq!(d[1], 0.1);
    }

    #[test]
    fn consensus_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 2..8 {
            let mut edges: Vec<_> = (1..n).map(|i| CommEdge::new(i, i + 1, rng.gen_range(0.1..3.0))).collect();
            edges.push(CommEdge::new(1, n, 0.7));
            let comm = build_comm_laplacian(n, &edges).unwrap();
            let t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
            let cfg = ControllerConfig::new(DMatrix::identity(n, n) * 2.0, t.clone(), vec![1.0; n], comm).unwrap();
            let c = rng.gen_range(-2.0..2.0);
            let vartheta: Vec<f64> = t.iter().map(|ti| ti * c).collect();
            assert!(controller_rhs(&cfg, &vartheta, &vec![0.0; n]).amax() < 1e-14);
        }
    }

    #[test]
    fn closed_loop_structure_splits() {
        let plant = two_machine();
        let cl = ClosedLoop::new(plant, identity_config(2, 1.5), vec![0.2, 0.1]).unwrap();
        let s = cl.structure();
        let j = (s - s.transpose()) * 0.5;
        assert_eq!(&j + j.transpose(), DMatrix::zeros(cl.dim(), cl.dim()));
        assert_eq!(cl.dissipation(), &cl.dissipation().transpose());
        assert!(crate::numeric::min_symmetric_eigenvalue(cl.dissipation()) >= -1e-12);
    }

    #[test]
    fn closed_loop_matches_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for &n in &[2, 3, 5] {
            for _ in 0..50 {
                let plant = random_plant(&mut rng, n);
                let diag: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..3.0)).collect();
                let mut q = DMatrix::from_diagonal(&DVector::from_vec(diag));
                q[(0, 1)] = 0.1;
                q[(1, 0)] = 0.1;
                let edges: Vec<_> = (1..n).map(|i| CommEdge::new(i, i + 1, rng.gen_range(0.1..3.0))).collect();
                let comm = build_comm_laplacian(n, &edges).unwrap();
                let t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
                let k: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..2.0)).collect();
                let cfg = ControllerConfig::new(q, t, k, comm).unwrap();
                let p_d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                let s = random_state(&mut rng, &plant);
                let cl = ClosedLoop::new(plant, cfg, p_d).unwrap();
                let vartheta: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let x = cl.stack(&s, &vartheta);
                assert!((cl.rhs(&x) - cl.composed_rhs(&x)).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_loop_fixed_point_verifies() {
        // Unloaded aligned equilibrium with zero demand is an optimal point.
        let plant = two_machine();
        let eq = aligned_equilibrium(&plant);
        let cl = ClosedLoop::new(plant, identity_config(2, 1.0), vec![0.0, 0.0]).unwrap();
        let x = cl.stack(&eq, &[0.0, 0.0]);
        assert!(cl.rhs(&x).amax() < 1e-15);
        let report = cl.verify_steady_state(&x, 1e-10).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(cl.dissipation_rate(&x, &x), 0.0);

        let mut bumped = x.clone();
        bumped[0] += 1e-3 * cl.plant().machines()[0].inertia;
        let report = cl.verify_steady_state(&bumped, 1e-5).unwrap();
        assert!(!report.get("omega_inf").unwrap().passed);
        assert!(report.get("grad_voltage_inf").unwrap().passed);
        assert!(cl.dissipation_rate(&bumped, &x) < 0.0);
    }
}
