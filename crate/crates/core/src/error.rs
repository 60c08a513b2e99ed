use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("edge {edge}: self-loop at node {node}")]
    SelfLoop { edge: usize, node: usize },

    #[error("edge {edge}: node index {node} out of range 1..={n}")]
    NodeOutOfRange { edge: usize, node: usize, n: usize },

    #[error("{what}: reactance must be positive, got {value}")]
    NonPositiveReactance { what: String, value: f64 },

    #[error("{what}: weight must be positive, got {value}")]
    NonPositiveWeight { what: String, value: f64 },

    #[error("{what} graph is disconnected (unreachable from node 1: {unreachable:?})")]
    Disconnected { what: &'static str, unreachable: Vec<usize> },

    #[error("machine {machine}: {field}: {message}")]
    InvalidMachine { machine: usize, field: &'static str, message: String },

    #[error("machine {machine}: {axis}-axis dissipation condition violated (margin {margin:.6e})")]
    DissipationCondition { machine: usize, axis: char, margin: f64 },

    #[error("cost matrix Q is not symmetric positive definite")]
    CostNotPositiveDefinite,

    #[error("{what}: dimension mismatch (expected {expected}, got {got})")]
    Dimension { what: &'static str, expected: usize, got: usize },

    #[error("{0}")]
    InvalidParameter(String),

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64, trace: Vec<f64> },

    #[error("singular Jacobian at Newton iteration {iteration}")]
    SingularJacobian { iteration: usize },

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("parse error at line {line}, column {column}: {message}")]
    ConfigParse { line: usize, column: usize, message: String },

    #[error("invalid scenario ({} problem{}):\n{}", .0.len(), if .0.len() == 1 { "" } else { "s" }, crate::config::format_issues(.0))]
    ConfigInvalid(Vec<crate::config::ConfigIssue>),
}
