//! Command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure (unreadable or invalid
//! scenario, failed structural check, bad arguments), 2 runtime failure
//! (Newton divergence, integration failure, I/O while writing results).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::{load_config, ScenarioConfig};
use crate::controller::optimal_dispatch;
use crate::error::Error;
use crate::report::{
    hessian_check, structural_checks, write_csv, DispatchReport, RunReport, StructuralReport, SteadyStateSummary,
};
use crate::simulation::{run_scenario, Method};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Parser)]
#[command(name = "phgrid", version, about = "Multi-machine power network simulator with distributed optimal frequency control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scenario and print the structural report.
    Validate { config: PathBuf },
    /// Print the optimal dispatch for the scenario's demand.
    Dispatch { config: PathBuf },
    /// Solve for the closed-loop steady state.
    SteadyState { config: PathBuf },
    /// Simulate the closed loop and write the trajectory and report.
    Simulate {
        config: PathBuf,
        /// Output directory (default: the scenario's `output.directory`, else `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Fixed step for RK4.
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Rk4,
    Rk45,
}

const DEFAULT_DT: f64 = 1e-3;

/// Apply `--method`, `--dt` and `--t-end` to the scenario's integrator.
pub fn apply_overrides(
    cfg: &mut ScenarioConfig,
    method: Option<MethodArg>,
    dt: Option<f64>,
    t_end: Option<f64>,
) -> Result<(), String> {
    let current = cfg.integrator.method;
    cfg.integrator.method = match (method, current) {
        (Some(MethodArg::Rk45), _) if dt.is_some() => return Err("--dt only applies to --method rk4".into()),
        (Some(MethodArg::Rk45), Method::Rk45 { .. }) => current,
        (Some(MethodArg::Rk45), Method::Rk4 { .. }) => Method::default(),
        (Some(MethodArg::Rk4), Method::Rk4 { dt: old }) | (None, Method::Rk4 { dt: old }) => {
            Method::Rk4 { dt: dt.unwrap_or(old) }
        }
        (Some(MethodArg::Rk4), Method::Rk45 { .. }) => Method::Rk4 { dt: dt.unwrap_or(DEFAULT_DT) },
        (None, Method::Rk45 { .. }) if dt.is_some() => return Err("--dt requires --method rk4 for an rk45 scenario".into()),
        (None, Method::Rk45 { .. }) => current,
    };
    if let Some(t) = t_end {
        cfg.integrator.t_end = t;
    }
    cfg.integrator.validate().map_err(|e| e.to_string())
}

struct Io<'a> {
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

impl Io<'_> {
    fn json(&mut self, text: &str) {
        let _ = writeln!(self.out, "{text}");
    }

    fn fail(&mut self, code: i32, msg: impl std::fmt::Display) -> i32 {
        let _ = writeln!(self.err, "error: {msg}");
        code
    }
}

fn load(io: &mut Io, path: &Path) -> Result<ScenarioConfig, i32> {
    load_config(path).map_err(|e| io.fail(EXIT_VALIDATION, e))
}

/// Run the CLI on `args` (including the program name) and return the exit
/// code. Output goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let mut io = Io { out, err };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(io.err, "{text}");
            } else {
                let _ = write!(io.out, "{text}");
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Validate { config } => cmd_validate(&mut io, &config),
        Command::Dispatch { config } => cmd_dispatch(&mut io, &config),
        Command::SteadyState { config } => cmd_steady_state(&mut io, &config),
        Command::Simulate { config, out, method, dt, t_end } => {
            cmd_simulate(&mut io, &config, out.as_deref(), method, dt, t_end)
        }
    };
    result.unwrap_or_else(|code| code)
}

fn cmd_validate(io: &mut Io, path: &Path) -> Result<i32, i32> {
    let cfg = load(io, path)?;
    let mut checks = structural_checks(&cfg);
    let scenario = cfg.scenario().map_err(|e| io.fail(EXIT_VALIDATION, e))?;
    let steady = scenario.solve_steady_state().ok();
    checks.push(hessian_check(steady.as_ref()));
    let structural = StructuralReport::new(checks);
    let report = RunReport::new(&cfg.name, structural.clone());
    io.json(&report.to_json());
    if structural.passed {
        Ok(EXIT_OK)
    } else {
        let names: Vec<&str> = structural.failures().map(|c| c.name.as_str()).collect();
        Err(io.fail(EXIT_VALIDATION, format!("structural checks failed: {}", names.join(", "))))
    }
}

fn cmd_dispatch(io: &mut Io, path: &Path) -> Result<i32, i32> {
    let cfg = load(io, path)?;
    let p_d = cfg.demand();
    let sol = optimal_dispatch(&cfg.q_matrix(), &p_d).map_err(|e| io.fail(EXIT_VALIDATION, e))?;
    let report = DispatchReport::new(&sol, &p_d);
    io.json(&serde_json::to_string_pretty(&report).expect("dispatch serialises"));
    Ok(EXIT_OK)
}

fn cmd_steady_state(io: &mut Io, path: &Path) -> Result<i32, i32> {
    let cfg = load(io, path)?;
    let scenario = cfg.scenario().map_err(|e| io.fail(EXIT_VALIDATION, e))?;
    let res = scenario.solve_steady_state();
    let summary = SteadyStateSummary::from_result(&scenario.closed_loop, &res);
    io.json(&serde_json::to_string_pretty(&summary).expect("summary serialises"));
    match res {
        Ok(_) => Ok(EXIT_OK),
        Err(e) => {
            let trace = match &e {
                Error::NewtonDiverged { trace, .. } => {
                    trace.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(" -> ")
                }
                _ => String::new(),
            };
            Err(io.fail(EXIT_RUNTIME, format!("{e}; residual trace: [{trace}]")))
        }
    }
}

fn cmd_simulate(
    io: &mut Io,
    path: &Path,
    out_dir: Option<&Path>,
    method: Option<MethodArg>,
    dt: Option<f64>,
    t_end: Option<f64>,
) -> Result<i32, i32> {
    let mut cfg = load(io, path)?;
    apply_overrides(&mut cfg, method, dt, t_end).map_err(|e| io.fail(EXIT_VALIDATION, e))?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("output"));
    let structural = StructuralReport::new(structural_checks(&cfg));
    let scenario = cfg.scenario().map_err(|e| io.fail(EXIT_VALIDATION, e))?;
    let outcome = match run_scenario(&scenario) {
        Ok(o) => o,
        Err(e @ Error::DissipationCondition { .. }) => {
            io.json(&RunReport::new(&cfg.name, structural).to_json());
            return Err(io.fail(EXIT_VALIDATION, e));
        }
        Err(e) => return Err(io.fail(EXIT_RUNTIME, e)),
    };

    let mut report = RunReport::new(&cfg.name, structural);
    let cl = &scenario.closed_loop;
    report.dispatch = cl.dispatch().ok().map(|d| DispatchReport::new(&d, cl.demand()));
    let steady = match (&outcome.steady_state, &outcome.steady_state_failure) {
        (Some(s), _) => Ok(s.clone()),
        (None, Some(f)) => Err(Error::InvalidParameter(f.message.clone())),
        (None, None) => Err(Error::InvalidParameter("steady state not computed".into())),
    };
    report.steady_state = Some(SteadyStateSummary::from_result(cl, &steady));
    report.endpoint = outcome.endpoint.clone();
    report.monitors = Some(outcome.monitors.clone());
    report.integration_failure = outcome.integration_failure.clone();
    report.converged = Some(outcome.converged());

    let write = |name: &str, f: &dyn Fn(&mut std::fs::File) -> std::io::Result<()>| -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(&dir)?;
        let p = dir.join(name);
        let mut file = std::fs::File::create(&p)?;
        f(&mut file)?;
        Ok(p)
    };
    let csv = write(TRAJECTORY_FILE, &|f| write_csv(std::io::BufWriter::new(f), cl, &outcome.trajectory))
        .map_err(|e| io.fail(EXIT_RUNTIME, format!("writing trajectory: {e}")))?;
    let json = report.to_json();
    let rep = write(REPORT_FILE, &|f| f.write_all(format!("{json}\n").as_bytes()))
        .map_err(|e| io.fail(EXIT_RUNTIME, format!("writing report: {e}")))?;
    let _ = writeln!(io.err, "wrote {} and {}", csv.display(), rep.display());
    io.json(&json);

    match &outcome.integration_failure {
        Some(f) => Err(io.fail(
            EXIT_RUNTIME,
            format!("integration failed at t = {}: {}", f.time.map_or("?".into(), |t| t.to_string()), f.message),
        )),
        None => Ok(EXIT_OK),
    }
}
