//! Scenario files.
//!
//! A scenario is one JSON document. All electrical quantities are per-unit,
//! times are seconds, node numbers are 1-based.
//!
//! ```json
//! {
//!   "name": "two machines",
//!   "machines": [ { "inertia": 5.0, "x_d": 1.8, ..., "e_f": 1.2, "p_d": 0.3 }, ... ],
//!   "lines": [ { "positive_end": 1, "negative_end": 2, "x_t": 1.5 } ],
//!   "controller": {
//!     "q": [[1.0, 0.0], [0.0, 2.0]],
//!     "t": [1.0, 1.0],
//!     "k": [1.0, 1.0],
//!     "comm_edges": [ { "from": 1, "to": 2, "weight": 1.0 } ]
//!   },
//!   "integrator": { "method": "rk45", "rtol": 1e-8, "atol": 1e-10, "t_end": 200.0, "record_stride": 10 },
//!   "initial": { "mode": "flat" },
//!   "steady_state": { "tol": 1e-10, "max_iterations": 50, "fd_step": 1e-6 },
//!   "verify_tol": 1e-5,
//!   "output": { "directory": "out" }
//! }
//! ```
//!
//! `integrator`, `initial`, `steady_state`, `verify_tol` and `output` are
//! optional. `initial.mode` is `flat`, `perturbed` (with `radius`, `seed`) or
//! `explicit` (with `p`, `delta`, `eq_prime`, `ed_prime`, `eq_dprime`,
//! `ed_dprime`, `vartheta`).

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::controller::{ClosedLoop, ControllerConfig};
use crate::error::{Error, Result};
use crate::machine::MachineParams;
use crate::network::{build_comm_laplacian, unreachable_nodes, CommEdge, EdgeSpec};
use crate::plant::Plant;
use crate::simulation::{InitialCondition, IntegratorConfig, Method, NewtonConfig, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub machines: Vec<MachineEntry>,
    pub lines: Vec<EdgeSpec>,
    pub controller: ControllerSection,
    #[serde(default = "default_integrator")]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub steady_state: NewtonConfig,
    #[serde(default = "default_verify_tol")]
    pub verify_tol: f64,
    #[serde(default)]
    pub output: OutputSection,
}

/// Machine parameters plus the constant local demand `P_d` at its bus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "MachineEntryFields")]
pub struct MachineEntry {
    #[serde(flatten)]
    pub params: MachineParams,
    pub p_d: f64,
}

// Flat mirror of `MachineEntry` so unknown keys are rejected; serde ignores
// `deny_unknown_fields` on structs with flattened fields.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MachineEntryFields {
    inertia: f64,
    x_d: f64,
    x_d_prime: f64,
    x_d_dprime: f64,
    x_q: f64,
    x_q_prime: f64,
    x_q_dprime: f64,
    t_d_prime: f64,
    t_d_dprime: f64,
    t_q_prime: f64,
    t_q_dprime: f64,
    e_f: f64,
    p_d: f64,
}

impl From<MachineEntryFields> for MachineEntry {
    fn from(f: MachineEntryFields) -> Self {
        let params = MachineParams {
            inertia: f.inertia,
            x_d: f.x_d,
            x_d_prime: f.x_d_prime,
            x_d_dprime: f.x_d_dprime,
            x_q: f.x_q,
            x_q_prime: f.x_q_prime,
            x_q_dprime: f.x_q_dprime,
            t_d_prime: f.t_d_prime,
            t_d_dprime: f.t_d_dprime,
            t_q_prime: f.t_q_prime,
            t_q_dprime: f.t_q_dprime,
            e_f: f.e_f,
        };
        Self { params, p_d: f.p_d }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    /// Generation cost matrix, symmetric positive definite.
    pub q: Vec<Vec<f64>>,
    /// Diagonal of the controller time constants `T`.
    pub t: Vec<f64>,
    /// Diagonal of the droop gains `K`.
    pub k: Vec<f64>,
    pub comm_edges: Vec<CommEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
}

fn default_integrator() -> IntegratorConfig {
    IntegratorConfig { method: Method::default(), t_end: 200.0, record_stride: 1 }
}

fn default_verify_tol() -> f64 {
    1e-5
}

/// One semantic problem in a scenario, located by section, optional 1-based
/// item index and field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub section: &'static str,
    pub index: Option<usize>,
    pub field: String,
    pub message: String,
}

impl ConfigIssue {
    fn new(section: &'static str, index: Option<usize>, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { section, index, field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self.section {
            "machines" => "machine",
            "lines" => "line",
            "comm_edges" => "comm edge",
            s => s,
        };
        match self.index {
            Some(i) => write!(f, "{label} {i}: {}: {}", self.field, self.message),
            None => write!(f, "{label}: {}: {}", self.field, self.message),
        }
    }
}

pub fn format_issues(issues: &[ConfigIssue]) -> String {
    issues.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n")
}

fn check_edge(
    issues: &mut Vec<ConfigIssue>,
    section: &'static str,
    idx: usize,
    ends: [(&str, usize); 2],
    n: usize,
) -> bool {
    let mut ok = true;
    for (field, node) in ends {
        if node == 0 || node > n {
            issues.push(ConfigIssue::new(section, Some(idx), field, format!("node {node} out of range 1..={n}")));
            ok = false;
        }
    }
    if ok && ends[0].1 == ends[1].1 {
        issues.push(ConfigIssue::new(section, Some(idx), ends[1].0, format!("self-loop at node {}", ends[0].1)));
        ok = false;
    }
    ok
}

fn check_vec_len(issues: &mut Vec<ConfigIssue>, section: &'static str, field: &str, len: usize, n: usize) {
    if len != n {
        issues.push(ConfigIssue::new(section, None, field, format!("expected {n} entries (one per machine), got {len}")));
    }
}

impl ScenarioConfig {
    pub fn n(&self) -> usize {
        self.machines.len()
    }

    /// Every violated invariant of the scenario. Empty when valid.
    pub fn issues(&self) -> Vec<ConfigIssue> {
        let mut issues = Vec::new();
        let n = self.n();
        if n == 0 {
            issues.push(ConfigIssue::new("machines", None, "machines", "at least one machine is required"));
        }
        for (i, m) in self.machines.iter().enumerate() {
            for e in m.params.violations(i + 1) {
                if let Error::InvalidMachine { machine, field, message } = e {
                    issues.push(ConfigIssue::new("machines", Some(machine), field, message));
                }
            }
            if !m.p_d.is_finite() {
                issues.push(ConfigIssue::new("machines", Some(i + 1), "p_d", format!("must be finite, got {}", m.p_d)));
            }
        }

        let mut lines_ok = true;
        for (idx, e) in self.lines.iter().enumerate() {
            lines_ok &= check_edge(
                &mut issues,
                "lines",
                idx + 1,
                [("positive_end", e.positive_end), ("negative_end", e.negative_end)],
                n,
            );
            if !(e.x_t >= 0.0 && e.x_t.is_finite()) {
                issues.push(ConfigIssue::new("lines", Some(idx + 1), "x_t", format!("must be finite and >= 0, got {}", e.x_t)));
            }
        }
        if n > 0 && lines_ok {
            let unreachable = unreachable_nodes(n, self.lines.iter().map(|e| (e.positive_end - 1, e.negative_end - 1)));
            if !unreachable.is_empty() {
                let nodes: Vec<usize> = unreachable.into_iter().map(|v| v + 1).collect();
                issues.push(ConfigIssue::new(
                    "lines",
                    None,
                    "connectivity",
                    format!("electrical network is disconnected; machines {nodes:?} unreachable from machine 1"),
                ));
            }
        }

        let c = &self.controller;
        let q_shape_ok = c.q.len() == n && c.q.iter().all(|r| r.len() == n);
        if !q_shape_ok {
            issues.push(ConfigIssue::new("controller", None, "q", format!("must be a {n}x{n} matrix")));
        } else if n > 0 {
            let q = DMatrix::from_fn(n, n, |i, j| c.q[i][j]);
            if q.iter().any(|v| !v.is_finite()) {
                issues.push(ConfigIssue::new("controller", None, "q", "entries must be finite"));
            } else if ControllerConfig::new(q.clone(), vec![1.0; n], vec![1.0; n], path_graph(n)).is_err() {
                issues.push(ConfigIssue::new("controller", None, "q", "cost matrix Q must be symmetric positive definite"));
            }
        }
        check_vec_len(&mut issues, "controller", "t", c.t.len(), n);
        check_vec_len(&mut issues, "controller", "k", c.k.len(), n);
        for (field, values) in [("t", &c.t), ("k", &c.k)] {
            for (i, v) in values.iter().enumerate() {
                if !(*v > 0.0 && v.is_finite()) {
                    issues.push(ConfigIssue::new("controller", None, format!("{field}[{}]", i + 1), format!("must be positive, got {v}")));
                }
            }
        }
        let mut comm_ok = true;
        for (idx, e) in c.comm_edges.iter().enumerate() {
            comm_ok &= check_edge(&mut issues, "comm_edges", idx + 1, [("from", e.from), ("to", e.to)], n);
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                issues.push(ConfigIssue::new("comm_edges", Some(idx + 1), "weight", format!("must be positive, got {}", e.weight)));
            }
        }
        if n > 0 && comm_ok {
            let unreachable = unreachable_nodes(n, c.comm_edges.iter().map(|e| (e.from - 1, e.to - 1)));
            if !unreachable.is_empty() {
                let nodes: Vec<usize> = unreachable.into_iter().map(|v| v + 1).collect();
                issues.push(ConfigIssue::new(
                    "controller",
                    None,
                    "comm_edges",
                    format!("communication graph connectivity violated; controllers {nodes:?} unreachable from controller 1"),
                ));
            }
        }

        if let Err(e) = self.integrator.validate() {
            issues.push(ConfigIssue::new("integrator", None, "integrator", e.to_string()));
        }
        match &self.initial {
            InitialCondition::Flat => {}
            InitialCondition::Perturbed { radius, .. } => {
                if !(*radius >= 0.0 && radius.is_finite()) {
                    issues.push(ConfigIssue::new("initial", None, "radius", format!("must be finite and >= 0, got {radius}")));
                }
            }
            InitialCondition::Explicit(e) => {
                for (field, v) in [
                    ("p", &e.p),
                    ("delta", &e.delta),
                    ("eq_prime", &e.eq_prime),
                    ("ed_prime", &e.ed_prime),
                    ("eq_dprime", &e.eq_dprime),
                    ("ed_dprime", &e.ed_dprime),
                    ("vartheta", &e.vartheta),
                ] {
                    check_vec_len(&mut issues, "initial", field, v.len(), n);
                    if v.iter().any(|x| !x.is_finite()) {
                        issues.push(ConfigIssue::new("initial", None, field, "entries must be finite"));
                    }
                }
            }
        }
        let ss = &self.steady_state;
        if !(ss.tol > 0.0) {
            issues.push(ConfigIssue::new("steady_state", None, "tol", format!("must be positive, got {}", ss.tol)));
        }
        if !(ss.fd_step > 0.0) {
            issues.push(ConfigIssue::new("steady_state", None, "fd_step", format!("must be positive, got {}", ss.fd_step)));
        }
        if !(self.verify_tol > 0.0) {
            issues.push(ConfigIssue::new("verify_tol", None, "verify_tol", format!("must be positive, got {}", self.verify_tol)));
        }
        issues
    }

    pub fn validate(&self) -> Result<()> {
        let issues = self.issues();
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(issues))
        }
    }

    pub fn demand(&self) -> Vec<f64> {
        self.machines.iter().map(|m| m.p_d).collect()
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| self.controller.q[i][j])
    }

    pub fn plant(&self) -> Result<Plant> {
        self.validate()?;
        Plant::new(self.machines.iter().map(|m| m.params).collect(), self.lines.clone())
    }

    pub fn closed_loop(&self) -> Result<ClosedLoop> {
        let plant = self.plant()?;
        let comm = build_comm_laplacian(self.n(), &self.controller.comm_edges)?;
        let cfg = ControllerConfig::new(self.q_matrix(), self.controller.t.clone(), self.controller.k.clone(), comm)?;
        ClosedLoop::new(plant, cfg, self.demand())
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Ok(Scenario {
            name: self.name.clone(),
            closed_loop: self.closed_loop()?,
            integrator: self.integrator,
            initial: self.initial.clone(),
            newton: self.steady_state,
            verify_tol: self.verify_tol,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }
}

fn path_graph(n: usize) -> crate::network::CommGraph {
    let edges: Vec<CommEdge> = (1..n).map(|i| CommEdge::new(i, i + 1, 1.0)).collect();
    build_comm_laplacian(n, &edges).expect("path graph is connected")
}

/// Parse without semantic validation.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    serde_json::from_str(text).map_err(|e| Error::ConfigParse { line: e.line(), column: e.column(), message: e.to_string() })
}

/// Parse and validate, reporting every semantic problem at once.
pub fn parse_and_validate(text: &str) -> Result<ScenarioConfig> {
    let cfg = parse_config(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_and_validate(&text)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::machine::fixtures::machine;

    pub fn two_machine_config() -> ScenarioConfig {
        let m = machine();
        ScenarioConfig {
            name: "two machines".into(),
            machines: vec![MachineEntry { params: m, p_d: 0.3 }, MachineEntry { params: m, p_d: 0.1 }],
            lines: vec![EdgeSpec::new(1, 2, 1.5)],
            controller: ControllerSection {
                q: vec![vec![1.0, 0.0], vec![0.0, 2.0]],
                t: vec![1.0, 1.0],
                k: vec![1.0, 1.0],
                comm_edges: vec![CommEdge::new(1, 2, 1.0)],
            },
            integrator: IntegratorConfig { method: Method::Rk4 { dt: 0.01 }, t_end: 1.0, record_stride: 10 },
            initial: InitialCondition::Flat,
            steady_state: NewtonConfig::default(),
            verify_tol: 1e-5,
            output: OutputSection::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::two_machine_config;
    use super::*;

    fn fields(err: Error) -> Vec<String> {
        match err {
            Error::ConfigInvalid(issues) => issues.iter().map(|i| i.to_string()).collect(),
            other => panic!("expected validation failure, got {other:?}"),
        }
    }

    #[test]
    fn fixture_is_valid_and_round_trips() {
        let cfg = two_machine_config();
        assert!(cfg.issues().is_empty(), "{:?}", cfg.issues());
        let text = cfg.to_json();
        let back = parse_and_validate(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn awkward_floats_round_trip() {
        let mut cfg = two_machine_config();
        cfg.machines[0].p_d = 0.1 + 0.2;
        cfg.machines[1].params.inertia = std::f64::consts::PI * 1e-3;
        cfg.controller.q[0][0] = 1.0 / 3.0;
        assert_eq!(parse_config(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn optional_sections_default() {
        let mut v: serde_json::Value = serde_json::from_str(&two_machine_config().to_json()).unwrap();
        for k in ["integrator", "initial", "steady_state", "verify_tol", "output", "name"] {
            v.as_object_mut().unwrap().remove(k);
        }
        let cfg = parse_and_validate(&v.to_string()).unwrap();
        assert_eq!(cfg.integrator.method, Method::default());
        assert_eq!(cfg.initial, InitialCondition::Flat);
        assert_eq!(cfg.verify_tol, 1e-5);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_config("{\n  \"machines\": [,]\n}").unwrap_err();
        match err {
            Error::ConfigParse { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("{\"bogus\": 1}"), Err(Error::ConfigParse { .. })));
    }

    #[test]
    fn unknown_machine_keys_are_rejected() {
        let json = two_machine_config().to_json().replacen("\"p_d\"", "\"x_dd\": 1.0, \"p_d\"", 1);
        let err = parse_config(&json).unwrap_err();
        assert!(err.to_string().contains("x_dd"), "{err}");
        assert!(parse_config(&two_machine_config().to_json()).is_ok());
    }

    #[test]
    fn reactance_ordering_is_cited() {
        let mut cfg = two_machine_config();
        cfg.machines[1].params.x_d_prime = 2.0;
        let f = fields(cfg.validate().unwrap_err());
        assert!(f.iter().any(|s| s.starts_with("machine 2: x_d_prime") && s.contains("reactance ordering")), "{f:?}");
    }

    #[test]
    fn disconnected_comm_graph_is_cited() {
        let mut cfg = two_machine_config();
        cfg.controller.comm_edges.clear();
        let f = fields(cfg.validate().unwrap_err());
        assert!(f.iter().any(|s| s.contains("comm_edges") && s.contains("connectivity")), "{f:?}");
    }

    #[test]
    fn all_violations_are_collected() {
        let mut cfg = two_machine_config();
        cfg.machines[0].params.inertia = -1.0;
        cfg.machines[1].params.x_q_prime = 3.0;
        cfg.lines[0].x_t = -0.2;
        cfg.controller.q = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        cfg.controller.k = vec![1.0];
        cfg.controller.comm_edges.push(CommEdge::new(1, 4, 1.0));
        let f = fields(cfg.validate().unwrap_err());
        for want in ["machine 1: inertia", "machine 2: x_q_prime", "line 1: x_t", "controller: q", "controller: k", "comm edge 2: to"] {
            assert!(f.iter().any(|s| s.starts_with(want)), "missing {want} in {f:?}");
        }
    }

    #[test]
    fn empty_and_mismatched_sections() {
        let mut cfg = two_machine_config();
        cfg.machines.clear();
        let f = fields(cfg.validate().unwrap_err());
        assert!(f.iter().any(|s| s.contains("at least one machine")));

        let mut cfg = two_machine_config();
        cfg.lines = vec![EdgeSpec::new(1, 1, 0.1)];
        let f = fields(cfg.validate().unwrap_err());
        assert!(f.iter().any(|s| s.starts_with("line 1: negative_end") && s.contains("self-loop")), "{f:?}");

        let mut cfg = two_machine_config();
        cfg.lines.clear();
        let f = fields(cfg.validate().unwrap_err());
        assert!(f.iter().any(|s| s.contains("electrical network is disconnected")), "{f:?}");
    }

    #[test]
    fn builds_scenario() {
        let sc = two_machine_config().scenario().unwrap();
        assert_eq!(sc.closed_loop.plant().n(), 2);
        assert_eq!(sc.closed_loop.demand(), &[0.3, 0.1]);
    }

    #[test]
    fn load_reports_missing_file() {
        assert!(matches!(load_config("/nonexistent/scenario.json"), Err(Error::Io { .. })));
    }
}
