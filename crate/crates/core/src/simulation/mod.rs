//! Time integration, steady-state location and scenario runs.

pub mod batch;
pub mod integrator;
pub mod newton;
pub mod passivity;
pub mod scenario;
pub mod steady;

pub use batch::{basin_probe, equivalence_sweep, run_batch, BasinPoint, EquivalenceStats};
pub use integrator::{integrate, IntegratorConfig, Method, Solution};
pub use newton::{newton, NewtonConfig, NewtonSolution};
pub use passivity::{shifted_passivity, PassivityRecord};
pub use scenario::{
    run_scenario, simulate_from, EndpointSummary, ExplicitState, Failure, InitialCondition, MonitorSummary, Scenario,
    ScenarioOutcome, Trajectory,
};
pub use steady::{find_closed_loop_steady_state, find_open_loop_steady_state, SteadyStateResult};
