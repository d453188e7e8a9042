//! Two-period values from the recursion against J_2(x) = x + βρ(Z⁺).

use riskdiv::case_studies::two_stage_closed_form;
use riskdiv::{finite_horizon_solve, IncrementModel, RiskParams, SurplusGrid};

fn main() -> riskdiv::Result<()> {
    let model = IncrementModel::double_exponential(2.0)?;
    let grid = SurplusGrid::covering(0.05, 50.0)?;
    for gamma in [0.0, 0.5, 1.0, 2.0] {
        let params = RiskParams::new(0.99, gamma)?;
        let res = finite_horizon_solve(2, params, &model, grid)?;
        let j2 = &res.values[1];
        let err = (0..grid.n_nodes())
            .map(|i| (j2.value(i) - two_stage_closed_form(grid.x(i), params, &model).unwrap()).abs())
            .fold(0.0, f64::max);
        println!("gamma={gamma}: J_2(0)={:.10} max deviation {err:.2e}", j2.value(0));
    }
    Ok(())
}
