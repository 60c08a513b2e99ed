//! Independent runs fanned out over an [`Execution`] mode. Every work item
//! derives its randomness from its own seed, so results do not depend on
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{direct_rhs, dq_currents, electrical_power, PhStructure};
use crate::error::Result;
use crate::exec::{map, Execution};
use crate::random::{random_plant, random_state};
use crate::simulation::scenario::{perturb, run_scenario, simulate_from, Scenario, ScenarioOutcome};
use crate::simulation::steady::SteadyStateResult;

pub fn run_batch(scenarios: &[Scenario], exec: Execution) -> Vec<Result<ScenarioOutcome>> {
    map(exec, scenarios, run_scenario)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinPoint {
    pub radius: f64,
    pub seed: u64,
    pub converged: bool,
    pub final_omega_inf: Option<f64>,
}

/// Run `scenario` from perturbed starts around its steady state for every
/// `(radius, seed)` pair and record whether the endpoint verifies.
pub fn basin_probe(scenario: &Scenario, radii: &[f64], seeds: &[u64], exec: Execution) -> Result<Vec<BasinPoint>> {
    // Solve once and start every probe from the same equilibrium.
    let steady: SteadyStateResult = scenario.solve_steady_state()?;
    let items: Vec<(f64, u64)> = radii.iter().flat_map(|&r| seeds.iter().map(move |&s| (r, s))).collect();
    let points = map(exec, &items, |&(radius, seed)| {
        let x0 = perturb(&scenario.closed_loop, &steady.vector(), radius, seed);
        let outcome = simulate_from(scenario, &x0, Some(steady.clone()));
        let (converged, final_omega_inf) = match &outcome {
            Ok(o) => (o.converged(), o.endpoint.as_ref().map(|e| e.omega_inf)),
            Err(_) => (false, None),
        };
        BasinPoint { radius, seed, converged, final_omega_inf }
    });
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceStats {
    pub samples: usize,
    /// Largest entry of `|direct_rhs - ph_rhs|` over all samples.
    pub max_abs_diff: f64,
    /// Largest `|sum P_e|` over all samples.
    pub max_abs_sum_pe: f64,
}

/// Compare the direct and port-Hamiltonian vector fields on random plants
/// and states. Sample `j` for size `n` uses seed `seed ^ hash(n, j)`.
pub fn equivalence_sweep(sizes: &[usize], samples_per_size: usize, seed: u64, exec: Execution) -> EquivalenceStats {
    let items: Vec<(usize, usize)> =
        sizes.iter().flat_map(|&n| (0..samples_per_size).map(move |j| (n, j))).collect();
    let results = map(exec, &items, |&(n, j)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((n as u64) << 32 | j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let plant = random_plant(&mut rng, n);
        let state = random_state(&mut rng, &plant);
        let u: Vec<f64> = (0..n).map(|i| 0.1 * (i as f64) - 0.2).collect();
        let p_d = vec![0.0; n];
        let direct = direct_rhs(&plant, &state, &u, &p_d);
        let ph = PhStructure::assemble(&plant).rhs(&plant, &state, &u).dx;
        let (i_d, i_q) = dq_currents(&plant, &state);
        let sum_pe: f64 = electrical_power(state.ed_dprime(), state.eq_dprime(), &i_d, &i_q).iter().sum();
        ((direct - ph).amax(), sum_pe.abs())
    });
    EquivalenceStats {
        samples: results.len(),
        max_abs_diff: results.iter().map(|r| r.0).fold(0.0, f64::max),
        max_abs_sum_pe: results.iter().map(|r| r.1).fold(0.0, f64::max),
    }
}
