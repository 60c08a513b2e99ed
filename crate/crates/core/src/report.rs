//! Machine-readable run reports and trajectory CSV output.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::controller::{Check, ClosedLoop, DispatchSolution};
use crate::dynamics::check_subtransient_condition;
use crate::network::unreachable_nodes;
use crate::numeric::min_symmetric_eigenvalue;
use crate::simulation::{EndpointSummary, ExplicitState, Failure, MonitorSummary, SteadyStateResult, Trajectory};

/// Checks that must hold before a scenario is simulated. Field order is
/// fixed so serialised reports are stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn positive(name: String, value: f64) -> Check {
    Check { name, value, tolerance: 0.0, passed: value > 0.0 }
}

fn zero_count(name: &str, count: usize) -> Check {
    Check { name: name.to_string(), value: count as f64, tolerance: 0.0, passed: count == 0 }
}

/// Per-machine, per-axis dissipation margins, graph connectivity and the
/// definiteness of `Q`. Expects a config that passed semantic validation.
pub fn structural_checks(cfg: &ScenarioConfig) -> Vec<Check> {
    let n = cfg.n();
    let mut checks = Vec::new();
    for (i, m) in cfg.machines.iter().enumerate() {
        let c = check_subtransient_condition(&m.params);
        checks.push(positive(format!("machine_{}_d_axis_dissipation_margin", i + 1), c.d_margin));
        checks.push(positive(format!("machine_{}_q_axis_dissipation_margin", i + 1), c.q_margin));
    }
    let electrical = unreachable_nodes(n, cfg.lines.iter().map(|e| (e.positive_end - 1, e.negative_end - 1)));
    checks.push(zero_count("electrical_network_unreachable_machines", electrical.len()));
    let comm = unreachable_nodes(n, cfg.controller.comm_edges.iter().map(|e| (e.from - 1, e.to - 1)));
    checks.push(zero_count("communication_graph_unreachable_controllers", comm.len()));
    checks.push(positive("cost_matrix_min_eigenvalue".into(), min_symmetric_eigenvalue(&cfg.q_matrix())));
    checks
}

pub fn hessian_check(steady: Option<&SteadyStateResult>) -> Check {
    positive("hessian_min_eigenvalue_at_steady_state".into(), steady.map_or(f64::NAN, |s| s.hessian_min_eigenvalue))
}

impl StructuralReport {
    pub fn new(checks: Vec<Check>) -> Self {
        Self { passed: checks.iter().all(|c| c.passed), checks }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchReport {
    pub lambda: f64,
    pub p_m: Vec<f64>,
    /// `1^T P_m* - 1^T P_d`
    pub balance_residual: f64,
}

impl DispatchReport {
    pub fn new(sol: &DispatchSolution, p_d: &[f64]) -> Self {
        let balance_residual = sol.p_m.iter().sum::<f64>() - p_d.iter().sum::<f64>();
        Self { lambda: sol.lambda, p_m: sol.p_m.clone(), balance_residual }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateSummary {
    pub converged: bool,
    pub iterations: Option<usize>,
    pub residual_norm: Option<f64>,
    pub hessian_min_eigenvalue: Option<f64>,
    pub hessian_positive_definite: Option<bool>,
    pub state: Option<ExplicitState>,
    pub trace: Vec<f64>,
    pub failure: Option<Failure>,
}

impl SteadyStateSummary {
    pub fn from_result(cl: &ClosedLoop, res: &crate::Result<SteadyStateResult>) -> Self {
        match res {
            Ok(s) => Self {
                converged: true,
                iterations: Some(s.iterations),
                residual_norm: Some(s.residual_norm),
                hessian_min_eigenvalue: Some(s.hessian_min_eigenvalue),
                hessian_positive_definite: Some(s.hessian_positive_definite()),
                state: Some(ExplicitState::from_vector(cl, &s.vector())),
                trace: s.trace.clone(),
                failure: None,
            },
            Err(e) => Self {
                converged: false,
                iterations: None,
                residual_norm: None,
                hessian_min_eigenvalue: None,
                hessian_positive_definite: None,
                state: None,
                trace: match e {
                    crate::Error::NewtonDiverged { trace, .. } => trace.clone(),
                    _ => Vec::new(),
                },
                failure: Some(Failure::from(e)),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub structural: StructuralReport,
    pub dispatch: Option<DispatchReport>,
    pub steady_state: Option<SteadyStateSummary>,
    pub endpoint: Option<EndpointSummary>,
    pub monitors: Option<MonitorSummary>,
    pub integration_failure: Option<Failure>,
    pub converged: Option<bool>,
}

impl RunReport {
    pub fn new(scenario: &str, structural: StructuralReport) -> Self {
        Self {
            scenario: scenario.to_string(),
            structural,
            dispatch: None,
            steady_state: None,
            endpoint: None,
            monitors: None,
            integration_failure: None,
            converged: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Trajectory column names: `t`, eight per machine, then `H`, `H_shifted`,
/// `sumPe`.
pub fn csv_header(n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    for i in 1..=n {
        for name in ["omega", "delta_rel", "Eq'", "Ed'", "Eq''", "Ed''", "Pm", "Pe"] {
            cols.push(format!("{name}_{i}"));
        }
    }
    cols.extend(["H", "H_shifted", "sumPe"].map(String::from));
    cols
}

/// Doubles with 17 significant digits, which round-trip exactly.
fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(mut w: W, cl: &ClosedLoop, traj: &Trajectory) -> io::Result<()> {
    let n = cl.plant().n();
    writeln!(w, "{}", csv_header(n).join(","))?;
    let mut row: Vec<String> = Vec::with_capacity(1 + 8 * n + 3);
    for k in 0..traj.len() {
        row.clear();
        let (s, _) = cl.split(&traj.states[k]);
        row.push(fmt_num(traj.times[k]));
        for i in 0..n {
            for v in [
                traj.omega[k][i],
                traj.delta_rel[k][i],
                s.eq_prime()[i],
                s.ed_prime()[i],
                s.eq_dprime()[i],
                s.ed_dprime()[i],
                traj.p_m[k][i],
                traj.p_e[k][i],
            ] {
                row.push(fmt_num(v));
            }
        }
        row.push(fmt_num(traj.hamiltonian[k]));
        row.push(fmt_num(traj.shifted_hamiltonian[k]));
        row.push(fmt_num(traj.sum_pe[k]));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
