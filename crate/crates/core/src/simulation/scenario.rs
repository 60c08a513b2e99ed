//! Closed-loop scenario runs with energy and conservation monitors.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::controller::{ClosedLoop, SteadyStateReport};
use crate::dynamics::{check_subtransient_condition, dq_currents, electrical_power};
use crate::error::{Error, Result};
use crate::numeric::inf_norm;
use crate::simulation::integrator::{integrate, IntegratorConfig, Solution};
use crate::simulation::newton::NewtonConfig;
use crate::simulation::steady::{
    find_closed_loop_steady_state, flat_start, plant_from_reduced, plant_to_reduced, steady_state_guess,
    SteadyStateResult,
};

/// Initial state of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InitialCondition {
    /// `omega = 0`, DC power-flow angles, `E' = E'' = E_f` on the q-axis,
    /// `vartheta = 0`.
    #[default]
    Flat,
    /// Solved steady state plus a random offset of infinity-norm `radius`
    /// in `(p, delta_2..n, E, vartheta)`.
    Perturbed { radius: f64, seed: u64 },
    Explicit(ExplicitState),
}

/// Full closed-loop state given through rotor angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitState {
    pub p: Vec<f64>,
    pub delta: Vec<f64>,
    pub eq_prime: Vec<f64>,
    pub ed_prime: Vec<f64>,
    pub eq_dprime: Vec<f64>,
    pub ed_dprime: Vec<f64>,
    pub vartheta: Vec<f64>,
}

impl ExplicitState {
    pub fn from_vector(cl: &ClosedLoop, x: &DVector<f64>) -> Self {
        let (s, vartheta) = cl.split(x);
        let delta = cl.plant().topology().relative_angles(s.eta());
        Self {
            p: s.p().to_vec(),
            delta,
            eq_prime: s.eq_prime().to_vec(),
            ed_prime: s.ed_prime().to_vec(),
            eq_dprime: s.eq_dprime().to_vec(),
            ed_dprime: s.ed_dprime().to_vec(),
            vartheta,
        }
    }

    pub fn to_vector(&self, cl: &ClosedLoop) -> Result<DVector<f64>> {
        let n = cl.plant().n();
        if self.vartheta.len() != n {
            return Err(Error::Dimension { what: "initial vartheta", expected: n, got: self.vartheta.len() });
        }
        let s = cl.plant().state_from_angles(
            &self.p,
            &self.delta,
            &self.eq_prime,
            &self.ed_prime,
            &self.eq_dprime,
            &self.ed_dprime,
        )?;
        Ok(cl.stack(&s, &self.vartheta))
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub closed_loop: ClosedLoop,
    pub integrator: IntegratorConfig,
    pub initial: InitialCondition,
    pub newton: NewtonConfig,
    /// Tolerance of the endpoint steady-state verification.
    pub verify_tol: f64,
}

impl Scenario {
    /// Newton guess: the explicit initial state if given, else a flat start
    /// with `theta` at the optimal price.
    pub fn steady_state_guess(&self) -> Result<DVector<f64>> {
        match &self.initial {
            InitialCondition::Explicit(e) => e.to_vector(&self.closed_loop),
            _ => steady_state_guess(&self.closed_loop),
        }
    }

    pub fn solve_steady_state(&self) -> Result<SteadyStateResult> {
        find_closed_loop_steady_state(&self.closed_loop, &self.steady_state_guess()?, &self.newton)
    }

    pub fn initial_state(&self, steady: Option<&SteadyStateResult>) -> Result<DVector<f64>> {
        match &self.initial {
            InitialCondition::Flat => flat_start(&self.closed_loop),
            InitialCondition::Explicit(e) => e.to_vector(&self.closed_loop),
            InitialCondition::Perturbed { radius, seed } => {
                let steady = steady.ok_or_else(|| {
                    Error::InvalidParameter("perturbed start requires a solved steady state".into())
                })?;
                Ok(perturb(&self.closed_loop, &steady.vector(), *radius, *seed))
            }
        }
    }
}

/// `xbar` moved by a uniform random offset of infinity-norm `radius` in
/// reduced coordinates.
pub fn perturb(cl: &ClosedLoop, xbar: &DVector<f64>, radius: f64, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (state, vartheta) = cl.split(xbar);
    let mut z = plant_to_reduced(cl.plant(), &state);
    z.extend_from_slice(&vartheta);
    let mut offset: Vec<f64> = (0..z.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = inf_norm(&offset);
    if norm > 0.0 {
        offset.iter_mut().for_each(|v| *v *= radius / norm);
    }
    z.iter_mut().zip(&offset).for_each(|(a, b)| *a += b);
    let n = cl.plant().n();
    let s = plant_from_reduced(cl.plant(), &z);
    cl.stack(&s, &z[6 * n - 1..])
}

/// Reject machines violating the subtransient dissipation condition,
/// naming the first offending machine (1-based) and axis.
pub fn dissipation_gate(cl: &ClosedLoop) -> Result<()> {
    for (i, m) in cl.plant().machines().iter().enumerate() {
        let c = check_subtransient_condition(m);
        if !c.d_ok() {
            return Err(Error::DissipationCondition { machine: i + 1, axis: 'd', margin: c.d_margin });
        }
        if !c.q_ok() {
            return Err(Error::DissipationCondition { machine: i + 1, axis: 'q', margin: c.q_margin });
        }
    }
    Ok(())
}

/// Recorded closed-loop samples with per-sample monitors.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub hamiltonian: Vec<f64>,
    /// `Hbar` against the solved steady state, NaN when none is available.
    pub shifted_hamiltonian: Vec<f64>,
    pub dissipation_rate: Vec<f64>,
    pub sum_pe: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
    /// Rotor angles relative to machine 1.
    pub delta_rel: Vec<Vec<f64>>,
    pub p_m: Vec<Vec<f64>>,
    pub p_e: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn from_samples(cl: &ClosedLoop, times: Vec<f64>, states: Vec<DVector<f64>>, reference: Option<&DVector<f64>>) -> Self {
        let k = states.len();
        let mut t = Trajectory {
            times,
            states: Vec::new(),
            hamiltonian: Vec::with_capacity(k),
            shifted_hamiltonian: Vec::with_capacity(k),
            dissipation_rate: Vec::with_capacity(k),
            sum_pe: Vec::with_capacity(k),
            omega: Vec::with_capacity(k),
            delta_rel: Vec::with_capacity(k),
            p_m: Vec::with_capacity(k),
            p_e: Vec::with_capacity(k),
        };
        for x in &states {
            let (s, _) = cl.split(x);
            let (i_d, i_q) = dq_currents(cl.plant(), &s);
            let p_e = electrical_power(s.ed_dprime(), s.eq_dprime(), &i_d, &i_q);
            t.hamiltonian.push(cl.hamiltonian(x));
            t.shifted_hamiltonian.push(reference.map_or(f64::NAN, |r| cl.shifted_hamiltonian(x, r)));
            t.dissipation_rate.push(reference.map_or(f64::NAN, |r| cl.dissipation_rate(x, r)));
            t.sum_pe.push(p_e.iter().sum());
            t.omega.push(cl.plant().omega(&s));
            t.delta_rel.push(cl.plant().topology().relative_angles(s.eta()));
            t.p_m.push(cl.mechanical_power(x).iter().copied().collect());
            t.p_e.push(p_e);
        }
        t.states = states;
        t
    }

    pub fn from_solution(cl: &ClosedLoop, sol: Solution, reference: Option<&DVector<f64>>) -> Self {
        Self::from_samples(cl, sol.times, sol.states, reference)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn monitor_summary(&self) -> MonitorSummary {
        let max_uptick = self
            .shifted_hamiltonian
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        MonitorSummary {
            samples: self.len(),
            max_abs_sum_pe: inf_norm(&self.sum_pe),
            max_shifted_uptick: if self.len() < 2 { 0.0 } else { max_uptick },
            max_dissipation_rate: self.dissipation_rate.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub samples: usize,
    pub max_abs_sum_pe: f64,
    /// Largest increase of `Hbar` between consecutive samples.
    pub max_shifted_uptick: f64,
    pub max_dissipation_rate: f64,
}

/// Conditions at the last recorded sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointSummary {
    pub t_final: f64,
    pub omega_inf: f64,
    pub dispatch_error_inf: f64,
    pub consensus_spread: f64,
    pub grad_voltage_inf: f64,
    /// Finite-difference rates between the last two samples.
    pub eta_rate_inf: f64,
    pub theta_rate_inf: f64,
    pub verification: SteadyStateReport,
}

pub fn endpoint_summary(cl: &ClosedLoop, traj: &Trajectory, tol: f64) -> Result<EndpointSummary> {
    let k = traj.len();
    let x = traj.states.last().ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
    let verification = cl.verify_steady_state(x, tol)?;
    let (_, vartheta) = cl.split(x);
    let theta = cl.config().theta(&vartheta);
    let spread = theta.max() - theta.min();
    let (eta_rate, theta_rate) = if k >= 2 {
        let dt = traj.times[k - 1] - traj.times[k - 2];
        let prev = &traj.states[k - 2];
        let eta = cl.plant_layout().eta();
        let er = eta.map(|i| ((x[i] - prev[i]) / dt).abs()).fold(0.0, f64::max);
        let (_, vt_prev) = cl.split(prev);
        let th_prev = cl.config().theta(&vt_prev);
        let tr = ((&theta - th_prev) / dt).amax();
        (er, tr)
    } else {
        (f64::NAN, f64::NAN)
    };
    let value = |name: &str| verification.get(name).map_or(f64::NAN, |c| c.value);
    Ok(EndpointSummary {
        t_final: traj.times[k - 1],
        omega_inf: value("omega_inf"),
        dispatch_error_inf: value("dispatch_error_inf"),
        consensus_spread: spread,
        grad_voltage_inf: value("grad_voltage_inf"),
        eta_rate_inf: eta_rate,
        theta_rate_inf: theta_rate,
        verification: verification.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub time: Option<f64>,
    pub message: String,
}

impl From<&Error> for Failure {
    fn from(e: &Error) -> Self {
        let time = match e {
            Error::NonFinite { t } | Error::StepUnderflow { t, .. } => Some(*t),
            _ => None,
        };
        Failure { time, message: e.to_string() }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub trajectory: Trajectory,
    pub steady_state: Option<SteadyStateResult>,
    pub steady_state_failure: Option<Failure>,
    /// Present when integration reached `t_end`.
    pub endpoint: Option<EndpointSummary>,
    pub monitors: MonitorSummary,
    pub integration_failure: Option<Failure>,
}

impl ScenarioOutcome {
    pub fn converged(&self) -> bool {
        self.integration_failure.is_none() && self.endpoint.as_ref().is_some_and(|e| e.verification.passed())
    }
}

/// Simulate the closed loop from the configured initial state and verify
/// the endpoint. Dissipation-condition violations are rejected before any
/// integration; integration failures are recorded in the outcome.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioOutcome> {
    dissipation_gate(&scenario.closed_loop)?;
    scenario.integrator.validate()?;
    let (steady_state, steady_state_failure) = match scenario.solve_steady_state() {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(Failure::from(&e))),
    };
    let x0 = scenario.initial_state(steady_state.as_ref())?;
    let mut outcome = simulate_from(scenario, &x0, steady_state)?;
    outcome.steady_state_failure = steady_state_failure;
    Ok(outcome)
}

/// Simulate from `x0` with a known steady state as the `Hbar` reference.
pub fn simulate_from(
    scenario: &Scenario,
    x0: &DVector<f64>,
    steady_state: Option<SteadyStateResult>,
) -> Result<ScenarioOutcome> {
    let cl = &scenario.closed_loop;
    dissipation_gate(cl)?;
    cl.check_dim(x0)?;
    let reference = steady_state.as_ref().map(|s| s.vector());
    let (trajectory, integration_failure) = match integrate(|_, x| cl.rhs(x), x0, &scenario.integrator) {
        Ok(sol) => (Trajectory::from_solution(cl, sol, reference.as_ref()), None),
        Err(e) => (
            Trajectory::from_samples(cl, vec![0.0], vec![x0.clone()], reference.as_ref()),
            Some(Failure::from(&e)),
        ),
    };
    let endpoint = match integration_failure {
        None => Some(endpoint_summary(cl, &trajectory, scenario.verify_tol)?),
        Some(_) => None,
    };
    let monitors = trajectory.monitor_summary();
    Ok(ScenarioOutcome {
        trajectory,
        steady_state,
        steady_state_failure: None,
        endpoint,
        monitors,
        integration_failure,
    })
}
