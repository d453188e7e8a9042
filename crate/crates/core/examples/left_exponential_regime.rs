//! Exponential claims: barrier below the critical risk aversion, pay-all above it.

use riskdiv::bands::default_eps_zero;
use riskdiv::case_studies::{exp_barrier_value_closed_form, exp_case_regime};
use riskdiv::solvers::{solve_auto, AutoGrid};
use riskdiv::{extract_bands, IncrementModel, RiskParams};

fn main() -> riskdiv::Result<()> {
    let (lambda, d, beta) = (6.0, 1.1, 0.99);
    let model = IncrementModel::left_exponential(lambda, d)?;
    for gamma in [0.05, 0.1, 0.5, 2.0, 5.94, 8.0] {
        let params = RiskParams::new(beta, gamma)?;
        let sol = solve_auto(params, &model, AutoGrid::default(), 1e-8)?;
        let bands = extract_bands(&sol.policy, default_eps_zero(sol.grid))?;
        let regime = exp_case_regime(lambda, d, params)?;
        let p = bands.top_barrier();
        let check = match exp_barrier_value_closed_form(lambda, d, params) {
            Ok(c) => format!("J(p)={:.6} closed form={c:.6}", sol.value.eval(p)),
            Err(_) => "no closed form".to_string(),
        };
        println!("gamma={gamma}: {regime:?}, {}, {check}", bands.summary());
    }
    Ok(())
}
