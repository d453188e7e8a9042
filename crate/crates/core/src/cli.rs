//! Command-line front end.
//!
//! `riskdiv <command> <config.toml> [key=value ...]`

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::bands::{default_eps_zero, extract_bands, extract_xi, BandPolicy};
use crate::case_studies::barrier_curve;
use crate::config::{ModelSpec, RunConfig};
use crate::error::Error;
use crate::format::num;
use crate::grid::{PolicyFn, SurplusGrid, ValueFn};
use crate::model::IncrementModel;
use crate::oracles::nested_mc_evaluate;
use crate::risk::{BbarBound, RiskParams};
use crate::solvers::{
    auto_x_max_range, finite_horizon_solve, infinite_horizon_solve_with, policy_iteration_traced, solve_auto_with,
    PolicyIterationTrace, SolveOptions, SolveReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

/// Tolerance of the reference fixed point used by `validate`.
const REFERENCE_TOL: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "riskdiv", version, about = "Optimal dividends under entropic risk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Finite-horizon values J_1..J_N and stage policies
    SolveFinite(RunArgs),
    /// Infinite-horizon value iteration with band extraction
    SolveInfinite(RunArgs),
    /// Policy iteration from the pay-all policy
    PolicyIter(RunArgs),
    /// Barrier level as a function of the risk aversion
    BarrierCurve(RunArgs),
    /// Monte-Carlo and fixed-point checks of solver output
    Validate(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration file
    config: PathBuf,
    /// overrides of the form key=value
    overrides: Vec<String>,
}

/// Failure carrying the process exit code.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_)
            | Error::InvalidModel(_)
            | Error::AssumptionsViolated(_)
            | Error::InvalidParams(_)
            | Error::InvalidGrid(_)
            | Error::EmptySupport
            | Error::NonintegrableTail
            | Error::RegimeViolation(_) => EXIT_CONFIG,
            _ => EXIT_SOLVER,
        };
        CliError { code, message: e.to_string() }
    }
}

/// Files produced by a command, written only after every computation succeeded.
struct Outputs {
    files: Vec<(String, String)>,
    warnings: Vec<String>,
    failed_checks: bool,
}

impl Outputs {
    fn new() -> Self {
        Self { files: Vec::new(), warnings: Vec::new(), failed_checks: false }
    }

    fn add(&mut self, name: impl Into<String>, content: String) {
        self.files.push((name.into(), content));
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("RD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n >= 1)
        .ok_or_else(|| CliError { code: EXIT_CONFIG, message: format!("RD_THREADS must be a positive integer, got '{raw}'") })?;
    // a pool built earlier in the same process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(command: Command) -> Result<i32, CliError> {
    configure_threads()?;
    let start = Instant::now();
    let (name, args) = match &command {
        Command::SolveFinite(a) => ("solve-finite", a),
        Command::SolveInfinite(a) => ("solve-infinite", a),
        Command::PolicyIter(a) => ("policy-iter", a),
        Command::BarrierCurve(a) => ("barrier-curve", a),
        Command::Validate(a) => ("validate", a),
    };
    let cfg = RunConfig::load(&args.config, &args.overrides)?;
    let out = match command {
        Command::SolveFinite(_) => solve_finite(&cfg)?,
        Command::SolveInfinite(_) => solve_infinite(&cfg)?,
        Command::PolicyIter(_) => policy_iter(&cfg)?,
        Command::BarrierCurve(_) => curve(&cfg)?,
        Command::Validate(_) => validate(&cfg)?,
    };
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    write_outputs(&cfg.output_dir, &out.files)?;
    eprintln!("{name}: wrote {} file(s) to {} in {:.3}s", out.files.len(), cfg.output_dir.display(), start.elapsed().as_secs_f64());
    Ok(if out.failed_checks { EXIT_VALIDATION } else { EXIT_OK })
}

fn write_outputs(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    let io = |e: std::io::Error, what: &Path| CliError {
        code: EXIT_SOLVER,
        message: format!("cannot write {}: {e}", what.display()),
    };
    std::fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
    for (name, content) in files {
        let target = dir.join(name);
        let tmp = dir.join(format!(".{name}.tmp"));
        std::fs::write(&tmp, content).map_err(|e| io(e, &tmp))?;
        std::fs::rename(&tmp, &target).map_err(|e| io(e, &target))?;
    }
    Ok(())
}

fn header(cfg: &RunConfig, command: &str, model: &IncrementModel, params: Option<RiskParams>) -> String {
    let mut s = format!("command={command}\nmodel={}\nbeta={}\n", model.descriptor(), num(cfg.beta));
    if let Some(p) = params {
        let _ = writeln!(s, "gamma={}", num(p.gamma()));
    }
    s
}

fn grid_text(grid: SurplusGrid) -> String {
    format!("step={}\nn_nodes={}\nx_max={}\n", num(grid.step()), grid.n_nodes(), num(grid.x_max()))
}

fn fixed_grid(cfg: &RunConfig, model: &IncrementModel) -> Result<SurplusGrid, CliError> {
    Ok(SurplusGrid::covering(cfg.step(model)?, cfg.fixed_x_max(model)?)?)
}

fn columns_csv(grid: SurplusGrid, names: &[String], cols: &[Vec<f64>]) -> String {
    let mut s = String::from("x");
    for n in names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for i in 0..grid.n_nodes() {
        s.push_str(&num(grid.x(i)));
        for c in cols {
            s.push(',');
            s.push_str(&num(c[i]));
        }
        s.push('\n');
    }
    s
}

fn value_policy_csv(value: &ValueFn, policy: &PolicyFn) -> (String, String) {
    let grid = value.grid();
    (
        columns_csv(grid, &["J".into()], &[value.values()]),
        columns_csv(grid, &["a".into()], &[policy.actions()]),
    )
}

fn bands_of(policy: &PolicyFn) -> Result<BandPolicy, CliError> {
    Ok(extract_bands(policy, default_eps_zero(policy.grid()))?)
}

fn solve_finite(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let params = cfg.params()?;
    let grid = fixed_grid(cfg, &cfg.model)?;
    let res = finite_horizon_solve(cfg.horizon, params, &cfg.model, grid)?;
    let n = res.horizon();
    let value_names: Vec<String> = (1..=n).map(|k| format!("J_{k}")).collect();
    let values: Vec<Vec<f64>> = res.values.iter().map(|v| v.values()).collect();
    let policy_names: Vec<String> = (1..=n).map(|k| format!("a_{k}")).collect();
    let actions: Vec<Vec<f64>> = res.policies.iter().map(|p| p.actions()).collect();

    let mut report = header(cfg, "solve-finite", &cfg.model, Some(params));
    let _ = writeln!(report, "horizon={n}");
    report.push_str(&grid_text(grid));
    for (k, p) in res.policies.iter().enumerate() {
        let xi = extract_xi(p, default_eps_zero(grid))?;
        let _ = writeln!(report, "xi_stage_{}={}", k + 1, num(xi));
    }
    let _ = writeln!(report, "first_stage={}", bands_of(res.first_stage_policy())?.summary());

    let mut out = Outputs::new();
    out.add("value.csv", columns_csv(grid, &value_names, &values));
    out.add("policy.csv", columns_csv(grid, &policy_names, &actions));
    out.add("report.txt", report);
    Ok(out)
}

fn solve_infinite(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let params = cfg.params()?;
    let sol = solve_auto_with(params, &cfg.model, cfg.grid, cfg.tol, cfg.max_iter)?;
    eprintln!("solve-infinite: {} sweeps in {:.3}s", sol.report.iterations, sol.report.wall_time);
    let bands = bands_of(&sol.policy)?;
    let mut report = header(cfg, "solve-infinite", &cfg.model, Some(params));
    let _ = writeln!(report, "tol={}", num(cfg.tol));
    report.push_str(&grid_text(sol.grid));
    report.push_str(&sol.report.to_text());
    let _ = writeln!(report, "classification={}\nbands={}", bands.classify(), bands.summary());

    let (value_csv, policy_csv) = value_policy_csv(&sol.value, &sol.policy);
    let mut out = Outputs::new();
    out.add("value.csv", value_csv);
    out.add("policy.csv", policy_csv);
    out.add("bands.csv", bands.to_csv());
    out.add("report.txt", report);
    Ok(out)
}

type PiOutcome = (PolicyFn, ValueFn, SolveReport, PolicyIterationTrace);

/// Policy iteration on a fixed grid, or on a grid doubled until ξ ≤ x_max/2.
fn policy_iteration_auto(cfg: &RunConfig, params: RiskParams) -> Result<PiOutcome, CliError> {
    let step = cfg.step(&cfg.model)?;
    if let Some(x_max) = cfg.grid.x_max {
        return Ok(policy_iteration_traced(params, &cfg.model, SurplusGrid::covering(step, x_max)?, cfg.tol, None)?);
    }
    let (mut x_max, cap) = auto_x_max_range(params, &cfg.model, step);
    loop {
        let grid = SurplusGrid::covering(step, x_max)?;
        let res = policy_iteration_traced(params, &cfg.model, grid, cfg.tol, None)?;
        if res.2.xi_estimate <= grid.x_max() / 2.0 || grid.x_max() >= cap {
            return Ok(res);
        }
        x_max = (2.0 * grid.x_max()).min(cap);
    }
}

fn policy_iter(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let params = cfg.params()?;
    let mut out = Outputs::new();
    let jumps = cfg.model.discontinuities();
    if matches!(cfg.model_spec, ModelSpec::Tabulated { .. }) && !jumps.is_empty() {
        let at: Vec<String> = jumps.iter().map(|z| num(*z)).collect();
        out.warnings.push(format!(
            "A3' not satisfied: the increment density jumps at z = {}; policy iteration may settle on a suboptimal rule",
            at.join(", ")
        ));
    }
    let (policy, value, report_inner, trace) = policy_iteration_auto(cfg, params)?;
    let grid = value.grid();
    let bands = bands_of(&policy)?;

    let mut gaps = String::from("iteration,gap\n");
    for (k, g) in trace.gaps.iter().enumerate() {
        let _ = writeln!(gaps, "{},{}", k + 1, num(*g));
    }
    let mut report = header(cfg, "policy-iter", &cfg.model, Some(params));
    let _ = writeln!(report, "tol={}", num(cfg.tol));
    report.push_str(&grid_text(grid));
    let _ = writeln!(report, "rounds={}", report_inner.iterations);
    let _ = writeln!(report, "final_gap={}", num(trace.gaps.last().copied().unwrap_or(0.0)));
    let _ = writeln!(report, "xi_estimate={}", num(report_inner.xi_estimate));
    let _ = writeln!(report, "classification={}\nbands={}", bands.classify(), bands.summary());
    for w in &out.warnings {
        let _ = writeln!(report, "warning={w}");
    }

    let (value_csv, policy_csv) = value_policy_csv(&value, &policy);
    out.add("gaps.csv", gaps);
    out.add("value.csv", value_csv);
    out.add("policy.csv", policy_csv);
    out.add("bands.csv", bands.to_csv());
    out.add("report.txt", report);
    Ok(out)
}

fn curve(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let members: Vec<(Option<&str>, &IncrementModel)> = if cfg.family.is_empty() {
        vec![(None, &cfg.model)]
    } else {
        cfg.family.iter().map(|(label, m)| (Some(label.as_str()), m)).collect()
    };
    let mut out = Outputs::new();
    let mut report = format!("command=barrier-curve\nbeta={}\nn_gammas={}\n", num(cfg.beta), cfg.gammas.len());
    for (label, model) in members {
        let c = barrier_curve(model, &cfg.gammas, cfg.beta, cfg.curve_mode)?;
        let name = label.map_or_else(|| "curve.csv".to_string(), |l| format!("curve_{l}.csv"));
        let failed = c.points.iter().filter(|p| p.barrier.is_nan()).count();
        let _ = writeln!(
            report,
            "{name}: model={} failed_points={failed} nonincreasing={} unimodal_zero_tail={}",
            model.descriptor(),
            c.is_nonincreasing(1e-9),
            c.is_unimodal_with_zero_tail(1e-9)
        );
        out.add(name, c.to_csv());
    }
    out.add("report.txt", report);
    Ok(out)
}

fn validate(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let params = cfg.params()?;
    let model = &cfg.model;
    let xi_star = BbarBound::new(cfg.beta, model).xi_star();
    let points = cfg.points.clone().unwrap_or_else(|| vec![0.0, xi_star / 2.0, xi_star]);
    let step = cfg.step(model)?;
    let top = points.iter().copied().fold(0.0, f64::max);
    let x_max = cfg.grid.x_max.unwrap_or(xi_star + 10.0 * step).max(top + 10.0 * step);
    let grid = SurplusGrid::covering(step, x_max)?;

    let fh = finite_horizon_solve(cfg.horizon, params, model, grid)?;
    let j_n = fh.values.last().expect("horizon >= 1");
    let mut table = String::from("check,x,solver_value,reference,stderr_proxy,pass\n");
    let mut all_pass = true;
    let mut row = |check: &str, x: f64, solver: f64, reference: f64, se: f64, pass: bool| {
        all_pass &= pass;
        let _ = writeln!(table, "{check},{},{},{},{},{}", num(x), num(solver), num(reference), num(se), if pass { "pass" } else { "fail" });
    };
    for &x in &points {
        let mc = nested_mc_evaluate(x, &fh.policies, params, model, cfg.mc)?;
        let solver = j_n.eval(x);
        let pass = (solver - mc.estimate).abs() <= 4.0 * mc.stderr_proxy + 1e-9 * (1.0 + solver.abs());
        row(&format!("monte_carlo_N{}", cfg.horizon), x, solver, mc.estimate, mc.stderr_proxy, pass);
    }

    let sol = solve_auto_with(params, model, cfg.grid, cfg.tol, cfg.max_iter)?;
    let opts = SolveOptions { warm_start: Some(sol.value.clone()), max_iter: None };
    let (reference, _, _) = infinite_horizon_solve_with(params, model, sol.grid, REFERENCE_TOL, &opts)?;
    for &x in &points {
        let (a, b) = (sol.value.eval(x), reference.eval(x));
        row("fixed_point", x, a, b, 0.0, (a - b).abs() <= cfg.fixed_point_threshold);
    }

    let mut report = header(cfg, "validate", model, Some(params));
    let _ = writeln!(report, "horizon={}\ntol={}", cfg.horizon, num(cfg.tol));
    let _ = writeln!(report, "mc_outer={}\nmc_inner={}\nseed={}", cfg.mc.outer, cfg.mc.inner, cfg.mc.seed);
    let _ = writeln!(report, "finite_grid_step={}\nfinite_grid_x_max={}", num(grid.step()), num(grid.x_max()));
    let _ = writeln!(report, "fixed_point_threshold={}", num(cfg.fixed_point_threshold));
    let _ = writeln!(report, "status={}", if all_pass { "pass" } else { "fail" });

    let mut out = Outputs::new();
    out.failed_checks = !all_pass;
    out.add("validation.csv", table);
    out.add("report.txt", report);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::Config("x".into())).code, EXIT_CONFIG);
        assert_eq!(CliError::from(Error::InvalidParams("x".into())).code, EXIT_CONFIG);
        assert_eq!(CliError::from(Error::PreconditionViolated("x".into())).code, EXIT_SOLVER);
    }

    #[test]
    fn help_and_unknown_commands() {
        assert_eq!(run(["riskdiv", "--help"]), EXIT_OK);
        assert_eq!(run(["riskdiv", "frobnicate", "x.toml"]), EXIT_CONFIG);
        assert_eq!(run(["riskdiv", "solve-finite", "/nonexistent/config.toml"]), EXIT_CONFIG);
    }

    #[test]
    fn columns_layout() {
        let g = SurplusGrid::new(0.5, 3).unwrap();
        let s = columns_csv(g, &["A".into(), "B".into()], &[vec![1.0, 2.0, 3.0], vec![0.0, 0.0, 0.25]]);
        assert_eq!(s, "x,A,B\n0,1,0\n0.5,2,0\n1,3,0.25\n");
    }
}
