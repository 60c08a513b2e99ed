//! Random machines, networks and states for property sweeps.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::machine::MachineParams;
use crate::network::EdgeSpec;
use crate::plant::Plant;
use crate::state::SystemState;

/// Machine with ordered reactances and `T'' << T'`, so the dissipation
/// condition holds on both axes.
pub fn random_machine<R: Rng + ?Sized>(rng: &mut R) -> MachineParams {
    let x_dpp = rng.gen_range(0.15..0.3);
    let x_d_prime = x_dpp + rng.gen_range(0.05..0.3);
    let x_q_prime = x_dpp + rng.gen_range(0.1..0.5);
    MachineParams {
        inertia: rng.gen_range(2.0..10.0),
        x_d: x_d_prime + rng.gen_range(0.8..1.8),
        x_d_prime,
        x_d_dprime: x_dpp,
        x_q: x_q_prime + rng.gen_range(0.6..1.6),
        x_q_prime,
        x_q_dprime: x_dpp,
        t_d_prime: rng.gen_range(4.0..10.0),
        t_d_dprime: rng.gen_range(0.02..0.05),
        t_q_prime: rng.gen_range(0.3..1.5),
        t_q_dprime: rng.gen_range(0.02..0.06),
        e_f: rng.gen_range(1.0..1.4),
    }
}

/// Connected random graph on `n` nodes: a random spanning tree plus up to
/// `n` extra edges (parallel edges allowed). Nodes are 1-based.
pub fn random_connected_pairs<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<(usize, usize)> {
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut pairs = Vec::new();
    for idx in 1..n {
        let parent = order[rng.gen_range(0..idx)];
        pairs.push((order[idx], parent));
    }
    if n > 1 {
        for _ in 0..rng.gen_range(0..=n) {
            let a = rng.gen_range(1..=n);
            let b = rng.gen_range(1..=n);
            if a != b {
                pairs.push((a, b));
            }
        }
    }
    pairs
}

pub fn random_plant<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Plant {
    let machines = (0..n).map(|_| random_machine(rng)).collect();
    let edges = random_connected_pairs(rng, n)
        .into_iter()
        .map(|(a, b)| EdgeSpec::new(a, b, rng.gen_range(0.1..1.0)))
        .collect();
    Plant::new(machines, edges).expect("random plant is valid by construction")
}

/// State with `eta = D^T delta` for random rotor angles.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, plant: &Plant) -> SystemState {
    let n = plant.n();
    let mut draw = |lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|_| rng.gen_range(lo..hi)).collect() };
    let p = draw(-0.5, 0.5);
    let delta = draw(-1.0, 1.0);
    let eq1 = draw(0.8, 1.4);
    let ed1 = draw(-0.3, 0.3);
    let eq2 = draw(0.8, 1.3);
    let ed2 = draw(-0.3, 0.3);
    plant.state_from_angles(&p, &delta, &eq1, &ed1, &eq2, &ed2).expect("dimensions match")
}
