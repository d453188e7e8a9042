//! Finite-horizon recursion, infinite-horizon value iteration, policy
//! evaluation and policy iteration.

use std::time::Instant;

use crate::bands::{default_eps_zero, extract_xi};
use crate::error::{Error, Result};
use crate::grid::{PolicyFn, SurplusGrid, ValueFn};
use crate::model::IncrementModel;
use crate::operators::{apply_policy, HProfile};
use crate::risk::{BbarBound, RiskParams};

/// Slack used when checking value-function invariants.
pub const TOL_NUM: f64 = 1e-8;

/// Diagnostics of an iterative solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// sup-norm of the last bounded-part update
    pub final_residual: f64,
    /// final_residual·β/(1−β): a bound on the distance to the fixed point
    pub certified_error: f64,
    pub xi_estimate: f64,
    /// β·|b̄ − b(x_max)|
    pub tail_extension_error: f64,
    /// seconds
    pub wall_time: f64,
    /// every sweep's residual, in order
    pub residuals: Vec<f64>,
}

impl SolveReport {
    /// `key=value` lines. Wall time is left out so reports are reproducible.
    pub fn to_text(&self) -> String {
        use crate::format::num;
        format!(
            "iterations={}\nfinal_residual={}\ncertified_error={}\nxi_estimate={}\ntail_extension_error={}\n",
            self.iterations,
            num(self.final_residual),
            num(self.certified_error),
            num(self.xi_estimate),
            num(self.tail_extension_error)
        )
    }
}

/// J_1, …, J_N and the time-indexed optimal decision rules.
#[derive(Debug, Clone)]
pub struct FiniteHorizonResult {
    /// `values[n-1]` is J_n
    pub values: Vec<ValueFn>,
    /// `policies[k]` is the rule used at time k+1 of an N-period problem
    pub policies: Vec<PolicyFn>,
}

impl FiniteHorizonResult {
    pub fn horizon(&self) -> usize {
        self.values.len()
    }

    /// Optimal first-period rule of the N-period problem.
    pub fn first_stage_policy(&self) -> &PolicyFn {
        &self.policies[0]
    }
}

/// Knobs shared by the fixed-point solvers.
#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    pub max_iter: Option<usize>,
    /// initial value; defaults to J_0 = identity for value iteration
    pub warm_start: Option<ValueFn>,
}

fn stopping_residual(tol: f64, beta: f64) -> f64 {
    tol * (1.0 - beta) / beta
}

/// 10·⌈ln(tol(1−β)/b̄)/ln β⌉, at least 10.
pub fn default_max_iter(tol: f64, params: RiskParams, model: &IncrementModel) -> usize {
    let bbar = BbarBound::new(params.beta(), model).value;
    let sweeps = ((tol * (1.0 - params.beta()) / bbar).ln() / params.beta().ln()).ceil();
    if sweeps.is_finite() && sweeps > 1.0 {
        10 * sweeps as usize
    } else {
        10
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::InvalidParams(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

fn check_warm_start(v: &Option<ValueFn>, grid: SurplusGrid) -> Result<()> {
    match v {
        Some(v) if v.grid() != grid => Err(Error::InvalidGrid("warm start lives on a different grid".into())),
        _ => Ok(()),
    }
}

/// J_1 = id and J_{n+1} = T J_n for n < N.
pub fn finite_horizon_solve(
    horizon: usize,
    params: RiskParams,
    model: &IncrementModel,
    grid: SurplusGrid,
) -> Result<FiniteHorizonResult> {
    if horizon == 0 {
        return Err(Error::InvalidParams("horizon must be at least 1".into()));
    }
    let mut values = vec![ValueFn::identity(grid)];
    // greedy[n-1] attains J_n
    let mut greedy = vec![PolicyFn::pay_all(grid)];
    for _ in 1..horizon {
        let profile = HProfile::build(values.last().expect("nonempty"), params, model);
        values.push(ValueFn::from_bounded(grid, profile.prefix_max().to_vec())?);
        greedy.push(profile.policy());
    }
    greedy.reverse();
    Ok(FiniteHorizonResult { values, policies: greedy })
}

fn finish_report(
    iterations: usize,
    residuals: Vec<f64>,
    beta: f64,
    bbar: f64,
    b: &ValueFn,
    policy: &PolicyFn,
    start: Instant,
) -> SolveReport {
    let final_residual = residuals.last().copied().unwrap_or(0.0);
    let last = *b.bounded().last().expect("nonempty grid");
    SolveReport {
        iterations,
        final_residual,
        certified_error: final_residual * beta / (1.0 - beta),
        xi_estimate: extract_xi(policy, default_eps_zero(policy.grid())).unwrap_or(0.0),
        tail_extension_error: beta * (bbar - last).abs(),
        wall_time: start.elapsed().as_secs_f64(),
        residuals,
    }
}

/// Value iteration b_{k+1} = U b_k from b_0 ≡ 0 until the update is below
/// tol·(1−β)/β, which puts the iterate within `tol` of the fixed point.
pub fn infinite_horizon_solve(
    params: RiskParams,
    model: &IncrementModel,
    grid: SurplusGrid,
    tol: f64,
) -> Result<(ValueFn, PolicyFn, SolveReport)> {
    infinite_horizon_solve_with(params, model, grid, tol, &SolveOptions::default())
}

pub fn infinite_horizon_solve_with(
    params: RiskParams,
    model: &IncrementModel,
    grid: SurplusGrid,
    tol: f64,
    opts: &SolveOptions,
) -> Result<(ValueFn, PolicyFn, SolveReport)> {
    check_tol(tol)?;
    check_warm_start(&opts.warm_start, grid)?;
    let start = Instant::now();
    let beta = params.beta();
    let bbar = BbarBound::new(beta, model).value;
    let max_iter = opts.max_iter.unwrap_or_else(|| default_max_iter(tol, params, model));
    let target = stopping_residual(tol, beta);
    let mut v = opts.warm_start.clone().unwrap_or_else(|| ValueFn::identity(grid));
    let mut residuals = Vec::new();
    let mut policy = PolicyFn::pay_all(grid);
    for k in 1..=max_iter {
        let profile = HProfile::build(&v, params, model);
        let next = ValueFn::from_bounded(grid, profile.prefix_max().to_vec())?;
        let r = next.sup_distance(&v);
        residuals.push(r);
        policy = profile.policy();
        v = next;
        if r <= target {
            let report = finish_report(k, residuals, beta, bbar, &v, &policy, start);
            return Ok((v, policy, report));
        }
    }
    let report = finish_report(max_iter, residuals, beta, bbar, &v, &policy, start);
    Err(Error::MaxIterExceeded(Box::new(report)))
}

/// Fixed point of L_α by iterating bounded parts.
pub fn policy_evaluation(
    alpha: &PolicyFn,
    params: RiskParams,
    model: &IncrementModel,
    grid: SurplusGrid,
    tol: f64,
) -> Result<ValueFn> {
    policy_evaluation_with(alpha, params, model, grid, tol, &SolveOptions::default()).map(|(v, _)| v)
}

pub fn policy_evaluation_with(
    alpha: &PolicyFn,
    params: RiskParams,
    model: &IncrementModel,
    grid: SurplusGrid,
    tol: f64,
    opts: &SolveOptions,
) -> Result<(ValueFn, SolveReport)> {
    check_tol(tol)?;
    check_warm_start(&opts.warm_start, grid)?;
    if alpha.grid() != grid {
        return Err(Error::InvalidGrid("policy lives on a different grid".into()));
    }
    let start = Instant::now();
    let beta = params.beta();
    let bbar = BbarBound::new(beta, model).value;
    let max_iter = opts.max_iter.unwrap_or_else(|| default_max_iter(tol, params, model));
    let target = stopping_residual(tol, beta);
    let mut v = opts.warm_start.clone().unwrap_or_else(|| ValueFn::identity(grid));
    let mut residuals = Vec::new();
    for k in 1..=max_iter {
        let next = apply_policy(&HProfile::build(&v, params, model), alpha);
        let r = next.sup_distance(&v);
        residuals.push(r);
        v = next;
        if r <= target {
            let report = finish_report(k, residuals, beta, bbar, &v, alpha, start);
            return Ok((v, report));
        }
    }
    let report = finish_report(max_iter, residuals, beta, bbar, &v, alpha, start);
    Err(Error::MaxIterExceeded(Box::new(report)))
}

/// Largest maximiser δ of a ↦ a + Γ_α(x − a), where Γ_α is built from J_α.
pub fn policy_improvement_step(
    alpha: &PolicyFn,
    j_alpha: &ValueFn,
    params: RiskParams,
    model: &IncrementModel,
) -> Result<PolicyFn> {
    let grid = j_alpha.grid();
    if alpha.grid() != grid {
        return Err(Error::InvalidGrid("policy and value live on different grids".into()));
    }
    if let Some(i) = j_alpha.bounded().iter().position(|b| *b < -TOL_NUM) {
        return Err(Error::PreconditionViolated(format!(
            "J_alpha falls below the identity at x = {}",
            grid.x(i)
        )));
    }
    let xi_star = BbarBound::new(params.beta(), model).xi_star();
    for i in 0..grid.n_nodes() {
        if grid.x(i) > xi_star && grid.x(alpha.retained_index(i)) > xi_star + grid.step() {
            return Err(Error::PreconditionViolated(format!(
                "policy retains more than xi* = {xi_star} at x = {}",
                grid.x(i)
            )));
        }
    }
    Ok(HProfile::build(j_alpha, params, model).policy())
}

/// Every evaluated policy of a policy-iteration run.
#[derive(Debug, Clone)]
pub struct PolicyIterationTrace {
    /// δ_0 = pay-all, δ_1, …
    pub policies: Vec<PolicyFn>,
    /// J_{δ_k}
    pub values: Vec<ValueFn>,
    /// ∥J_{δ_k} − J_{δ_{k−1}}∥∞ for k ≥ 1
    pub gaps: Vec<f64>,
}

/// Policy iteration from α(x) = x.
pub fn policy_iteration(
    params: RiskParams,
    model: &IncrementModel,
    grid: SurplusGrid,
    tol: f64,
) -> Result<(PolicyFn, ValueFn, SolveReport)> {
    policy_iteration_traced(params, model, grid, tol, None).map(|(p, v, r, _)| (p, v, r))
}

/// Policy iteration returning the full sequence of policies and values.
///
/// Each evaluation runs to tol/10 and is warm-started from the previous
/// value, so the value sequence is nondecreasing node by node.
pub fn policy_iteration_traced(
    params: RiskParams,
    model: &IncrementModel,
    grid: SurplusGrid,
    tol: f64,
    max_rounds: Option<usize>,
) -> Result<(PolicyFn, ValueFn, SolveReport, PolicyIterationTrace)> {
    check_tol(tol)?;
    let start = Instant::now();
    let eval_tol = tol / 10.0;
    let max_rounds = max_rounds.unwrap_or(grid.n_nodes() + 10);
    let mut alpha = PolicyFn::pay_all(grid);
    let (mut j, mut report) = policy_evaluation_with(&alpha, params, model, grid, eval_tol, &SolveOptions::default())?;
    let mut trace = PolicyIterationTrace { policies: vec![alpha.clone()], values: vec![j.clone()], gaps: Vec::new() };
    for round in 1..=max_rounds {
        let delta = policy_improvement_step(&alpha, &j, params, model)?;
        if delta == alpha {
            return Ok(finish_pi(alpha, j, report, trace, round - 1, start));
        }
        let opts = SolveOptions { warm_start: Some(j.clone()), max_iter: None };
        let (j_next, rep) = policy_evaluation_with(&delta, params, model, grid, eval_tol, &opts)?;
        let gap = j_next.sup_distance(&j);
        trace.policies.push(delta.clone());
        trace.values.push(j_next.clone());
        trace.gaps.push(gap);
        alpha = delta;
        j = j_next;
        report = rep;
        if gap <= tol {
            return Ok(finish_pi(alpha, j, report, trace, round, start));
        }
    }
    report.iterations = max_rounds;
    Err(Error::MaxIterExceeded(Box::new(report)))
}

fn finish_pi(
    alpha: PolicyFn,
    j: ValueFn,
    mut report: SolveReport,
    trace: PolicyIterationTrace,
    rounds: usize,
    start: Instant,
) -> (PolicyFn, ValueFn, SolveReport, PolicyIterationTrace) {
    report.iterations = rounds;
    report.xi_estimate = extract_xi(&alpha, default_eps_zero(alpha.grid())).unwrap_or(0.0);
    report.wall_time = start.elapsed().as_secs_f64();
    (alpha, j, report, trace)
}

/// Grid request for [`solve_auto`]; `None` fields are chosen automatically.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AutoGrid {
    /// defaults to b̄/2000
    pub step: Option<f64>,
    /// fixed grid end; when absent the end is doubled until ξ ≤ x_max/2
    pub x_max: Option<f64>,
}

/// Result of [`solve_auto`].
#[derive(Debug, Clone)]
pub struct AutoSolution {
    pub grid: SurplusGrid,
    pub value: ValueFn,
    pub policy: PolicyFn,
    pub report: SolveReport,
}

/// Default grid step b̄/2000.
pub fn auto_step(params: RiskParams, model: &IncrementModel) -> Result<f64> {
    let bbar = BbarBound::new(params.beta(), model).value;
    if !(bbar > 0.0 && bbar.is_finite()) {
        return Err(Error::InvalidParams(format!("cannot size a grid from b̄ = {bbar}")));
    }
    Ok(bbar / 2000.0)
}

/// First grid end tried by the doubling search and the cap ξ* + 10·step.
pub fn auto_x_max_range(params: RiskParams, model: &IncrementModel, step: f64) -> (f64, f64) {
    let cap = BbarBound::new(params.beta(), model).xi_star() + 10.0 * step;
    let mean_abs = 2.0 * model.mean_positive_part() - model.mean();
    ((20.0 * mean_abs).max(200.0 * step).min(cap), cap)
}

/// Value iteration on a grid sized to the solution.
///
/// Starting from roughly twenty mean absolute increments, the grid end is
/// doubled (never beyond ξ* + 10·step) until the no-payout threshold sits in
/// the lower half of the grid. Each enlargement is warm-started from the
/// previous solution. The report counts the sweeps on every grid, and its
/// residual history runs across all of them.
pub fn solve_auto(params: RiskParams, model: &IncrementModel, auto: AutoGrid, tol: f64) -> Result<AutoSolution> {
    solve_auto_with(params, model, auto, tol, None)
}

/// [`solve_auto`] with a sweep limit per grid.
pub fn solve_auto_with(
    params: RiskParams,
    model: &IncrementModel,
    auto: AutoGrid,
    tol: f64,
    max_iter: Option<usize>,
) -> Result<AutoSolution> {
    let step = match auto.step {
        Some(h) => h,
        None => auto_step(params, model)?,
    };
    if let Some(x_max) = auto.x_max {
        let grid = SurplusGrid::covering(step, x_max)?;
        let opts = SolveOptions { warm_start: None, max_iter };
        let (value, policy, report) = infinite_horizon_solve_with(params, model, grid, tol, &opts)?;
        return Ok(AutoSolution { grid, value, policy, report });
    }
    let (mut x_max, cap) = auto_x_max_range(params, model, step);
    let mut warm: Option<ValueFn> = None;
    let start = Instant::now();
    let mut history: Vec<f64> = Vec::new();
    loop {
        let grid = SurplusGrid::covering(step, x_max)?;
        let warm_start = warm
            .as_ref()
            .map(|w| ValueFn::from_bounded(grid, grid.nodes().map(|x| w.eval(x) - x).collect()))
            .transpose()?;
        let opts = SolveOptions { warm_start, max_iter };
        let (value, policy, mut report) = infinite_horizon_solve_with(params, model, grid, tol, &opts)?;
        history.extend_from_slice(&report.residuals);
        if report.xi_estimate <= grid.x_max() / 2.0 || grid.x_max() >= cap {
            report.iterations = history.len();
            report.residuals = history;
            report.wall_time = start.elapsed().as_secs_f64();
            return Ok(AutoSolution { grid, value, policy, report });
        }
        x_max = (2.0 * grid.x_max()).min(cap);
        warm = Some(value);
    }
}

/// Largest violation of id ≤ v ≤ id + b̄ on the grid (0 when it holds).
pub fn sandwich_violation(v: &ValueFn, bbar: f64) -> f64 {
    v.bounded().iter().map(|b| (-b).max(b - bbar).max(0.0)).fold(0.0, f64::max)
}

/// Largest violation of v(x_{i+1}) − v(x_i) ≥ step.
pub fn secant_violation(v: &ValueFn) -> f64 {
    v.bounded().windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dexp(mu: f64) -> IncrementModel {
        IncrementModel::double_exponential(mu).unwrap()
    }

    #[test]
    fn one_and_two_periods() {
        let m = dexp(2.0);
        let grid = SurplusGrid::new(0.05, 300).unwrap();
        for gamma in [0.0, 1.0] {
            let p = RiskParams::new(0.99, gamma).unwrap();
            let res = finite_horizon_solve(2, p, &m, grid).unwrap();
            assert!(res.values[0].bounded().iter().all(|b| *b == 0.0));
            let c = 0.99 * m.entropic_premium_positive_part(gamma);
            assert!(res.values[1].bounded().iter().all(|b| (b - c).abs() < 1e-10));
            assert_eq!(res.policies[0], PolicyFn::pay_all(grid));
            assert_eq!(res.policies[1], PolicyFn::pay_all(grid));
        }
    }

    #[test]
    fn finite_values_increase_towards_fixed_point() {
        let m = dexp(0.5);
        let p = RiskParams::new(0.9, 0.5).unwrap();
        let grid = SurplusGrid::new(0.1, 200).unwrap();
        let fin = finite_horizon_solve(12, p, &m, grid).unwrap();
        let (j, _, rep) = infinite_horizon_solve(p, &m, grid, 1e-9).unwrap();
        for w in fin.values.windows(2) {
            for i in 0..grid.n_nodes() {
                assert!(w[1].value(i) >= w[0].value(i) - 1e-12);
            }
        }
        for v in &fin.values {
            for i in 0..grid.n_nodes() {
                assert!(v.value(i) <= j.value(i) + rep.certified_error + 1e-12);
            }
        }
    }

    #[test]
    fn pay_all_evaluation_matches_fixed_point_equation() {
        // J = x + c with c = −(β/γ) ln(e^{−γc}·M + G(0)), M = ∫_0^∞ e^{−γz} g
        let m = dexp(1.0);
        let (beta, gamma) = (0.9, 0.7);
        let p = RiskParams::new(beta, gamma).unwrap();
        let grid = SurplusGrid::new(0.1, 200).unwrap();
        let j = policy_evaluation(&PolicyFn::pay_all(grid), p, &m, grid, 1e-11).unwrap();
        let mm = m.exp_moment_above(0.0, gamma);
        let g0 = m.cdf(0.0);
        let mut c = 0.0f64;
        for _ in 0..2000 {
            c = -(beta / gamma) * ((-gamma * c).exp() * mm + g0).ln();
        }
        for i in 0..grid.n_nodes() {
            assert!((j.bounded()[i] - c).abs() < 1e-9, "{} vs {c}", j.bounded()[i]);
        }
        let neutral = RiskParams::new(beta, 0.0).unwrap();
        let j0 = policy_evaluation(&PolicyFn::pay_all(grid), neutral, &m, grid, 1e-11).unwrap();
        let c0 = beta * m.mean_positive_part() / (1.0 - beta * (1.0 - g0));
        assert!((j0.bounded()[17] - c0).abs() < 1e-9);
    }

    #[test]
    fn warm_start_from_upper_bound() {
        let m = dexp(1.0);
        let p = RiskParams::new(0.9, 0.4).unwrap();
        let grid = SurplusGrid::new(0.1, 250).unwrap();
        let tol = 1e-8;
        let (a, _, _) = infinite_horizon_solve(p, &m, grid, tol).unwrap();
        let bbar = BbarBound::new(0.9, &m).value;
        let opts = SolveOptions { warm_start: Some(ValueFn::shifted_identity(grid, bbar)), max_iter: None };
        let (b, _, _) = infinite_horizon_solve_with(p, &m, grid, tol, &opts).unwrap();
        assert!(a.sup_distance(&b) <= 2.0 * tol);
    }

    #[test]
    fn max_iter_carries_partial_report() {
        let m = dexp(1.0);
        let p = RiskParams::new(0.9, 0.4).unwrap();
        let grid = SurplusGrid::new(0.1, 100).unwrap();
        let opts = SolveOptions { max_iter: Some(3), warm_start: None };
        match infinite_horizon_solve_with(p, &m, grid, 1e-12, &opts) {
            Err(Error::MaxIterExceeded(r)) => {
                assert_eq!(r.iterations, 3);
                assert_eq!(r.residuals.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn improvement_rejects_bad_inputs() {
        let m = dexp(1.0);
        let p = RiskParams::new(0.9, 0.4).unwrap();
        let grid = SurplusGrid::new(0.1, 100).unwrap();
        let below = ValueFn::shifted_identity(grid, -1.0);
        assert!(matches!(
            policy_improvement_step(&PolicyFn::pay_all(grid), &below, p, &m),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn report_text_lists_fields() {
        let m = dexp(1.0);
        let p = RiskParams::new(0.8, 0.4).unwrap();
        let grid = SurplusGrid::new(0.1, 80).unwrap();
        let (_, _, rep) = infinite_horizon_solve(p, &m, grid, 1e-6).unwrap();
        let t = rep.to_text();
        for key in ["iterations=", "final_residual=", "certified_error=", "xi_estimate=", "tail_extension_error="] {
            assert!(t.contains(key));
        }
        assert!((rep.certified_error - rep.final_residual * 0.8 / 0.2).abs() < 1e-15);
    }
}
